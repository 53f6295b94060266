// SPDX-License-Identifier: Apache-2.0

#include "wpmec/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wpmec {

namespace {
constexpr double kLn2 = 0.6931471805599453094;
}

std::pair<double, double> myopic_offload_split(double arrival, double g_gain, double zeta,
                                               double cycles_per_bit, const SystemParams& p) {
  if (arrival < 0.0) throw std::domain_error("myopic_offload_split: negative arrival");
  if (arrival == 0.0) return {0.0, 0.0};
  const double tau = p.slot_duration, B = p.bandwidth, s2 = p.noise_power;
  const double C3 = cycles_per_bit * cycles_per_bit * cycles_per_bit;
  // d/dl [local(A-l)] - d/dl [offload(l)]; decreasing in l.
  auto deriv = [&](double l) {
    const double rem = arrival - l;
    return 3.0 * zeta * C3 * rem * rem / (tau * tau) -
           s2 * kLn2 * exp2_clamped(l / (tau * B)) / (B * g_gain);
  };
  if (deriv(0.0) <= 0.0) return {0.0, arrival};
  if (deriv(arrival) >= 0.0) return {arrival, 0.0};
  double lo = 0.0, hi = arrival;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (deriv(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * arrival) break;
  }
  const double l_off = 0.5 * (lo + hi);
  return {l_off, arrival - l_off};
}

OfflineSolution solve_myopic(const Scenario& scen, const SystemParams& p, double wpt_tol) {
  scen.validate(p);
  const int K = scen.K, N = scen.N, Nt = scen.Nt;
  OfflineSolution sol;
  sol.allocation = Allocation::zero(K, N, Nt);
  sol.dual = DualVariables::zero(K, N);

  double wpt_dual = 0.0;
  bool converged = true;
  for (int i = 0; i < N; ++i) {
    EnergyDemandProfile dem = EnergyDemandProfile::zero(K, 1);
    for (int k = 0; k < K; ++k) {
      double l_off = 0.0, l_loc = scen.arrival(k, i);
      if (i < N - 1) {
        auto split = myopic_offload_split(scen.arrival(k, i), scen.g_gain(k, i),
                                          p.user_capacitance[k], p.user_cycles_per_bit[k], p);
        l_off = split.first;
        l_loc = split.second;
      }
      sol.allocation.local(k, i) = l_loc;
      sol.allocation.offload(k, i) = l_off;
      dem.at(k, 0) = local_energy(l_loc, p.user_capacitance[k], p.user_cycles_per_bit[k],
                                  p.slot_duration) +
                     offload_energy_gain(l_off, scen.g_gain(k, i), p.noise_power, p.bandwidth,
                                         p.slot_duration);
    }
    if (i >= 1) {
      double mec = 0.0;
      for (int k = 0; k < K; ++k) mec += sol.allocation.offload(k, i - 1);
      sol.allocation.mec_bits[i] = mec;
    }
    // Per-slot beamforming sized to this slot's consumption.
    std::vector<cxd> hcol(static_cast<size_t>(K) * Nt);
    for (int k = 0; k < K; ++k) {
      auto h = scen.h(k, i);
      std::copy(h.begin(), h.end(), hcol.begin() + static_cast<size_t>(k) * Nt);
    }
    WptChannels wch{K, 1, Nt, hcol.data()};
    WptSolution ws = min_power_wpt(dem, wch, p.harvest_efficiency, p.slot_duration, wpt_tol);
    converged = converged && ws.converged;
    wpt_dual += ws.dual_value;
    sol.allocation.set_covariance(i, ws.covariance(0, Nt));
  }
  sol.objective = total_objective(sol.allocation, p);
  // The certificate covers the beamforming part of the construction only.
  double mec_e = 0.0;
  for (int i = 1; i < N; ++i)
    mec_e += mec_energy(sol.allocation.mec_bits[i], p.ap_capacitance, p.ap_cycles_per_bit,
                        p.slot_duration);
  sol.dual_value = wpt_dual + mec_e;
  sol.duality_gap = sol.objective - sol.dual_value;
  sol.converged = converged;
  sol.feasibility =
      check_feasibility(sol.allocation, scen, p, FeasibilityTolerances::scaled(scen, p));
  return sol;
}

OfflineSolution solve_local_only(const Scenario& scen, const SystemParams& p,
                                 const OfflineOptions& opts) {
  scen.validate(p);
  DualProblem dp = DualProblem::offline(scen, p);
  dp.enable_off = false;
  dp.finalize(opts.eps_lambda_rel);
  BlockSolution b = solve_block(dp, opts);

  OfflineSolution sol;
  sol.allocation = Allocation::zero(scen.K, scen.N, scen.Nt);
  sol.allocation.covariances = b.covariances;
  sol.allocation.local_bits = b.bits.loc;
  sol.objective = b.objective;
  sol.dual_value = b.dual_value;
  sol.duality_gap = b.gap;
  sol.dual = b.dual;
  sol.dual_iterations = b.dual_iterations;
  sol.converged = b.converged;
  sol.feasibility =
      check_feasibility(sol.allocation, scen, p, FeasibilityTolerances::scaled(scen, p));
  return sol;
}

OfflineSolution solve_full_offload(const Scenario& scen, const SystemParams& p,
                                   const OfflineOptions& opts) {
  scen.validate(p);
  if (scen.N < 2)
    throw std::invalid_argument(
        "solve_full_offload: infeasible with a single slot (nothing can be offloaded and "
        "executed)");
  DualProblem dp = DualProblem::offline(scen, p);
  // Local computing only where structurally unavoidable: bits arriving at
  // the last slot cannot reach the AP in time.
  dp.loc_enabled.assign(dp.T, 0);
  dp.loc_enabled[dp.T - 1] = 1;
  dp.finalize(opts.eps_lambda_rel);
  BlockSolution b = solve_block(dp, opts);

  OfflineSolution sol;
  sol.allocation = Allocation::zero(scen.K, scen.N, scen.Nt);
  sol.allocation.covariances = b.covariances;
  sol.allocation.mec_bits = b.bits.mec;
  sol.allocation.local_bits = b.bits.loc;
  sol.allocation.offload_bits = b.bits.off;
  sol.allocation.mec_bits[0] = 0.0;
  for (int k = 0; k < scen.K; ++k) sol.allocation.offload(k, scen.N - 1) = 0.0;
  sol.objective = b.objective;
  sol.dual_value = b.dual_value;
  sol.duality_gap = b.gap;
  sol.dual = b.dual;
  sol.dual_iterations = b.dual_iterations;
  sol.converged = b.converged;
  sol.feasibility =
      check_feasibility(sol.allocation, scen, p, FeasibilityTolerances::scaled(scen, p));
  return sol;
}

}  // namespace wpmec
