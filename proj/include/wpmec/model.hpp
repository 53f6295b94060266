// SPDX-License-Identifier: Apache-2.0
//
// Core domain types and the energy model of the wireless-powered MEC
// system: per-slot local/offload/harvest/MEC-server energies, the total
// AP-side objective, and an exact feasibility checker for the cumulative
// causality constraints.
//
// Units are fixed throughout: bits, joules, watts, seconds, Hz.  All bit
// quantities are continuous (partial offloading).

#ifndef WPMEC_MODEL_HPP
#define WPMEC_MODEL_HPP

#include <span>
#include <string>
#include <vector>

#include "wpmec/linalg.hpp"

namespace wpmec {

struct SystemParams {
  int num_users = 0;     // K
  int num_slots = 0;     // N
  int num_antennas = 0;  // N_t
  double slot_duration = 0.0;  // tau [s]
  double bandwidth = 0.0;      // B [Hz], per-user equal allocation
  double noise_power = 0.0;    // sigma^2 [W]
  double snr_penalty = 1.0;    // Gamma, fixed to 1
  std::vector<double> harvest_efficiency;  // eta_k in (0,1], size K
  std::vector<double> user_capacitance;    // zeta_k, size K
  double ap_capacitance = 0.0;             // zeta_0
  std::vector<double> user_cycles_per_bit;  // C_k, size K
  double ap_cycles_per_bit = 0.0;           // C_0

  // zeta_k C_k^3 / tau^2: cubic-energy coefficient of user k.
  double a_user(int k) const {
    const double c = user_cycles_per_bit[k];
    return user_capacitance[k] * c * c * c / (slot_duration * slot_duration);
  }
  double a_ap() const {
    const double c = ap_cycles_per_bit;
    return ap_capacitance * c * c * c / (slot_duration * slot_duration);
  }

  // Convenience: uniform per-user constants.
  static SystemParams uniform(int K, int N, int Nt, double tau, double B, double sigma2,
                              double eta, double zeta_user, double zeta_ap, double C_user,
                              double C_ap);

  void validate() const;  // throws std::invalid_argument on a bad field
};

// Ground-truth task arrivals and channel vectors, dimensions K x N,
// channel vectors of length N_t.
struct Scenario {
  int K = 0, N = 0, Nt = 0;
  std::vector<double> arrivals;          // K*N, arrivals[k*N + i]
  std::vector<cxd> wpt_channels;         // K*N*Nt
  std::vector<cxd> offload_channels;     // K*N*Nt

  double arrival(int k, int i) const { return arrivals[static_cast<size_t>(k) * N + i]; }
  double& arrival(int k, int i) { return arrivals[static_cast<size_t>(k) * N + i]; }
  std::span<const cxd> h(int k, int i) const {
    return {wpt_channels.data() + (static_cast<size_t>(k) * N + i) * Nt, static_cast<size_t>(Nt)};
  }
  std::span<cxd> h(int k, int i) {
    return {wpt_channels.data() + (static_cast<size_t>(k) * N + i) * Nt, static_cast<size_t>(Nt)};
  }
  std::span<const cxd> g(int k, int i) const {
    return {offload_channels.data() + (static_cast<size_t>(k) * N + i) * Nt,
            static_cast<size_t>(Nt)};
  }
  std::span<cxd> g(int k, int i) {
    return {offload_channels.data() + (static_cast<size_t>(k) * N + i) * Nt,
            static_cast<size_t>(Nt)};
  }
  double h_gain(int k, int i) const { return norm2(h(k, i)); }
  double g_gain(int k, int i) const { return norm2(g(k, i)); }
  double total_arrivals() const;

  static Scenario empty(int K, int N, int Nt);
  void validate(const SystemParams& p) const;
};

// Decision variables over the horizon.  Structural zeros are enforced on
// construction: mec_bits[0] == 0 and offload_bits[k][N-1] == 0.
struct Allocation {
  int K = 0, N = 0, Nt = 0;
  std::vector<cxd> covariances;    // N*Nt*Nt, column-major blocks
  std::vector<double> mec_bits;    // N
  std::vector<double> local_bits;  // K*N
  std::vector<double> offload_bits;  // K*N

  static Allocation zero(int K, int N, int Nt);

  CMat covariance(int i) const;
  void set_covariance(int i, const CMat& s);

  double local(int k, int i) const { return local_bits[static_cast<size_t>(k) * N + i]; }
  double& local(int k, int i) { return local_bits[static_cast<size_t>(k) * N + i]; }
  double offload(int k, int i) const { return offload_bits[static_cast<size_t>(k) * N + i]; }
  double& offload(int k, int i) { return offload_bits[static_cast<size_t>(k) * N + i]; }

  // Checks Hermitian symmetry (<= 1e-12 relative), boundary zeros, and
  // nonnegative bits; throws std::invalid_argument on violation.
  void validate_structure() const;
};

struct FeasibilityTolerances {
  double energy = 1e-9;        // joules
  double bits = 1e-9;          // bits (deadline equalities use this too)
  double nonnegativity = 0.0;  // bits / watts
  double psd = 1e-9;           // eigenvalue units (relative to trace)

  // Scale-aware defaults: bit tolerances proportional to total arrivals,
  // energy tolerance proportional to total consumption.
  static FeasibilityTolerances scaled(const Scenario& scen, const SystemParams& p,
                                      double rel = 1e-6);
};

struct FeasibilityReport {
  double energy_harvesting = 0.0;    // worst cumulative deficit [J]
  double user_task_causality = 0.0;  // worst early execution [bits]
  double user_deadline = 0.0;        // worst deadline mismatch [bits]
  double ap_task_causality = 0.0;    // [bits]
  double ap_deadline = 0.0;          // [bits]
  double nonnegativity = 0.0;        // worst negative variable magnitude
  double psd = 0.0;                  // worst negative covariance eigenvalue
  bool feasible = false;

  std::string summary() const;
};

// --- energy model ---

// 2^x with the exponent clamped so the result stays finite.
double exp2_clamped(double x);

double local_energy(double l_bits, double zeta, double cycles_per_bit, double tau);
double offload_energy(double l_bits, std::span<const cxd> g, double sigma2, double bandwidth,
                      double tau);
// Same with the channel gain ||g||^2 precomputed.
double offload_energy_gain(double l_bits, double g_gain, double sigma2, double bandwidth,
                           double tau);
double harvested_energy(const CMat& s, std::span<const cxd> h, double eta, double tau);
double mec_energy(double l_bits, double zeta0, double cycles_per_bit0, double tau);

// AP-side objective: sum_i tau*tr(S_i) + sum_{i>=2} E_mec(l_mec[i]).
double total_objective(const Allocation& alloc, const SystemParams& p);

FeasibilityReport check_feasibility(const Allocation& alloc, const Scenario& scen,
                                    const SystemParams& p, const FeasibilityTolerances& tol);

}  // namespace wpmec

#endif  // WPMEC_MODEL_HPP
