// SPDX-License-Identifier: Apache-2.0
//
// Minimum-power energy beamforming: given cumulative per-user harvested
// energy demands over a block of slots, find transmit covariances S_i >= 0
// minimizing sum_i tau*tr(S_i) subject to
//     sum_{j<=i} tau*eta_k h_{k,j}^H S_j h_{k,j} >= D[k][i]   for all k, i.
//
// The solver works on the dual: maximize sum_{k,i} y[k][i] D[k][i] over
// y >= 0 whose tail sums Y[k][j] keep  I - sum_k Y[k][j] eta_k h h^H  PSD at
// every slot.  That problem has K*T variables, smooth log-barrier structure
// (per-slot logdet plus chain monotonicity logs), and is driven to the
// central path by damped Newton steps with an increasing path parameter.
// Covariances are then recovered as nonnegative combinations of near-null
// directions of the slot certificates, topped up and trimmed until the
// cumulative demands are met tightly.  The returned duality gap certifies
// the construction.

#ifndef WPMEC_WPT_HPP
#define WPMEC_WPT_HPP

#include <span>
#include <vector>

#include "wpmec/linalg.hpp"

namespace wpmec {

// Cumulative demands D[k][i] (joules), nondecreasing in i per user.
struct EnergyDemandProfile {
  int K = 0, T = 0;
  std::vector<double> cumulative;  // K*T

  double at(int k, int i) const { return cumulative[static_cast<size_t>(k) * T + i]; }
  double& at(int k, int i) { return cumulative[static_cast<size_t>(k) * T + i]; }
  static EnergyDemandProfile zero(int K, int T) {
    return {K, T, std::vector<double>(static_cast<size_t>(K) * T, 0.0)};
  }
};

// Channels for a block of slots: h(k, j) of length Nt.
struct WptChannels {
  int K = 0, T = 0, Nt = 0;
  const cxd* data = nullptr;  // K*T*Nt, same layout as Scenario
  std::span<const cxd> h(int k, int j) const {
    return {data + (static_cast<size_t>(k) * T + j) * Nt, static_cast<size_t>(Nt)};
  }
};

struct WptSolution {
  std::vector<cxd> covariances;        // T * Nt * Nt
  double total_energy = 0.0;           // sum_i tau*tr(S_i)
  std::vector<double> dual_certificate;  // y[k][i] >= 0, K*T
  double dual_value = 0.0;             // <= optimum <= total_energy
  double gap = 0.0;                    // total_energy - dual_value
  bool converged = false;
  int newton_iterations = 0;

  CMat covariance(int i, int Nt) const;
  std::vector<double> slot_powers(int Nt) const;  // tr(S_i) per slot
};

// Rank-one maximum-ratio covariance p * h h^H / ||h||^2.
CMat mrc_covariance(std::span<const cxd> h, double power);

WptSolution min_power_wpt(const EnergyDemandProfile& demands, const WptChannels& channels,
                          std::span<const double> eta, double tau, double tol_rel = 1e-6);

}  // namespace wpmec

#endif  // WPMEC_WPT_HPP
