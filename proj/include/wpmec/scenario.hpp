// SPDX-License-Identifier: Apache-2.0
//
// Scenario generation: distance-dependent Rician fading channels, uniform
// task arrivals, and noisy predictions (relative Gaussian error on arrivals,
// elementwise complex relative error on the scattered channel component with
// the line-of-sight part assumed known).

#ifndef WPMEC_SCENARIO_HPP
#define WPMEC_SCENARIO_HPP

#include <cstdint>
#include <string>

#include "wpmec/model.hpp"

namespace wpmec {

struct ChannelGeometry {
  std::vector<double> distances;      // d_k [m], size K
  double pathloss_exponent = 3.0;     // alpha
  double reference_pathloss = 1.0;    // Omega_0, linear
  double rician_factor = 3.0;         // X_R

  static double db_to_linear(double db);
  static ChannelGeometry uniform(int K, double d, double alpha, double omega0_db,
                                 double rician);
  void validate(int K) const;

  // sqrt(X_R * Omega0 * d^-alpha / (1+X_R)) and sqrt(Omega0 * d^-alpha / (1+X_R))
  double los_coeff(int k) const;
  double scatter_coeff(int k) const;
};

struct PredictionErrorModel {
  double sigma_A = 0.0;
  double sigma_h = 0.0;
  double sigma_g = 0.0;
};

// Predicted TSI/CSI alongside the ground truth it was derived from.
struct PredictedScenario {
  Scenario truth;
  std::vector<double> arrivals_hat;   // K*N, clamped at 0
  std::vector<cxd> wpt_hat;           // K*N*Nt
  std::vector<cxd> offload_hat;       // K*N*Nt

  double arrival_hat(int k, int i) const {
    return arrivals_hat[static_cast<size_t>(k) * truth.N + i];
  }
  std::span<const cxd> h_hat(int k, int i) const {
    return {wpt_hat.data() + (static_cast<size_t>(k) * truth.N + i) * truth.Nt,
            static_cast<size_t>(truth.Nt)};
  }
  std::span<const cxd> g_hat(int k, int i) const {
    return {offload_hat.data() + (static_cast<size_t>(k) * truth.N + i) * truth.Nt,
            static_cast<size_t>(truth.Nt)};
  }
};

// Fills the channel arrays of a Scenario (arrivals untouched).  Deterministic
// in `seed`; every (user, slot, h/g) cell draws from its own substream.
void gen_channels(uint64_t seed, const ChannelGeometry& geom, const SystemParams& p,
                  Scenario& scen);

// I.i.d. uniform arrivals on [low, high] bits.
void gen_tasks(uint64_t seed, double low, double high, const SystemParams& p, Scenario& scen);

Scenario make_scenario(uint64_t seed, const ChannelGeometry& geom, double arr_low,
                       double arr_high, const SystemParams& p);

PredictedScenario gen_predictions(const Scenario& truth, const PredictionErrorModel& err,
                                  const ChannelGeometry& geom, uint64_t seed);

// JSON round-trip (complex numbers as [re, im] pairs).
std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);
std::string predicted_to_json(const PredictedScenario& ps);
PredictedScenario predicted_from_json(const std::string& text);

}  // namespace wpmec

#endif  // WPMEC_SCENARIO_HPP
