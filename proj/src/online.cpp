// SPDX-License-Identifier: Apache-2.0

#include "wpmec/online.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace wpmec {

WindowProblem build_window_problem(const OnlineState& state, const Scenario& scen_true,
                                   const PredictedScenario& pred, int window,
                                   const SystemParams& p, bool energy_carry,
                                   Restriction restriction) {
  const int N = scen_true.N, K = scen_true.K, Nt = scen_true.Nt;
  const int i0 = state.slot;
  if (window < 1 || window > N) throw std::invalid_argument("window size out of range");
  if (i0 < 0 || i0 >= N) throw std::invalid_argument("window start out of range");
  const int m_eff = std::min(window, N - i0);

  WindowProblem wp;
  wp.global_slot = i0;
  wp.m_eff = m_eff;
  DualProblem& dp = wp.data;
  dp.K = K;
  dp.T = m_eff;
  dp.Nt = Nt;
  dp.tau = p.slot_duration;
  dp.B = p.bandwidth;
  dp.sigma2 = p.noise_power;
  dp.eta = p.harvest_efficiency;
  dp.a_loc.resize(K);
  for (int k = 0; k < K; ++k) dp.a_loc[k] = p.a_user(k);
  dp.a_mec = p.a_ap();

  dp.arr.assign(static_cast<size_t>(K) * m_eff, 0.0);
  dp.g2.assign(static_cast<size_t>(K) * m_eff, 0.0);
  dp.h2.assign(static_cast<size_t>(K) * m_eff, 0.0);
  dp.hch.assign(static_cast<size_t>(K) * m_eff * Nt, cxd(0.0));
  for (int k = 0; k < K; ++k) {
    for (int m = 0; m < m_eff; ++m) {
      const int gi = i0 + m;
      std::span<const cxd> h = (m == 0) ? scen_true.h(k, gi) : pred.h_hat(k, gi);
      std::span<const cxd> g = (m == 0) ? scen_true.g(k, gi) : pred.g_hat(k, gi);
      std::copy(h.begin(), h.end(),
                dp.hch.begin() + (static_cast<size_t>(k) * m_eff + m) * Nt);
      dp.g2[static_cast<size_t>(k) * m_eff + m] = norm2(g);
      dp.h2[static_cast<size_t>(k) * m_eff + m] = norm2(h);
      dp.arr[static_cast<size_t>(k) * m_eff + m] =
          (m == 0) ? state.residual_user[k] + scen_true.arrival(k, gi)
                   : pred.arrival_hat(k, gi);
    }
  }
  dp.bank.assign(K, 0.0);
  if (energy_carry) dp.bank = state.energy_bank;
  dp.r_mec = state.residual_mec;
  dp.mec_first_slot = true;
  dp.pin_off_last = (i0 + m_eff == N);
  dp.enable_off = restriction != Restriction::LocalOnly;
  dp.loc_enabled.assign(m_eff, 1);
  if (restriction == Restriction::FullOffload) {
    std::fill(dp.loc_enabled.begin(), dp.loc_enabled.end(), 0);
    if (dp.pin_off_last) dp.loc_enabled[m_eff - 1] = 1;
  }
  dp.finalize();
  return wp;
}

OnlineState update_residuals(const OnlineState& state, const Commitment& committed,
                             std::span<const double> true_arrivals, double tol_bits) {
  OnlineState next = state;
  const int K = static_cast<int>(state.residual_user.size());
  double off_sum = 0.0;
  for (int k = 0; k < K; ++k) {
    double r = state.residual_user[k] + true_arrivals[k] - committed.loc[k] - committed.off[k];
    if (r < -tol_bits)
      throw std::logic_error("update_residuals: user residual went negative");
    next.residual_user[k] = std::max(0.0, r);
    off_sum += committed.off[k];
  }
  double rm = state.residual_mec - committed.mec + off_sum;
  if (rm < -tol_bits) throw std::logic_error("update_residuals: AP residual went negative");
  next.residual_mec = std::max(0.0, rm);
  next.slot = state.slot + 1;
  return next;
}

std::string slot_log_csv(const std::vector<SlotLog>& rows) {
  std::string out =
      "slot,m_eff,committed_loc,committed_off,committed_mec,slot_energy,residual_user,"
      "residual_mec,converged\n";
  char buf[256];
  for (const SlotLog& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d\n", r.slot, r.m_eff,
                  r.committed_loc, r.committed_off, r.committed_mec, r.slot_energy,
                  r.residual_user, r.residual_mec, r.converged ? 1 : 0);
    out += buf;
  }
  return out;
}

OnlineResult solve_sliding_window(const Scenario& scen_true, const PredictedScenario& pred,
                                  int window, const SystemParams& p,
                                  const OnlineOptions& opts) {
  scen_true.validate(p);
  const int N = scen_true.N, K = scen_true.K, Nt = scen_true.Nt;
  const double tol_bits = 1e-6 * (1.0 + scen_true.total_arrivals());

  OnlineResult res;
  res.trajectory = Allocation::zero(K, N, Nt);
  OnlineState state = OnlineState::initial(K);

  for (int i0 = 0; i0 < N; ++i0) {
    state.slot = i0;
    WindowProblem wp =
        build_window_problem(state, scen_true, pred, window, p, opts.energy_carry,
                             opts.restriction);
    BlockSolution sol = solve_block(wp.data, opts.inner);

    Commitment com;
    com.loc.resize(K);
    com.off.resize(K);
    for (int k = 0; k < K; ++k) {
      com.loc[k] = sol.bits.loc[static_cast<size_t>(k) * wp.m_eff];
      com.off[k] = sol.bits.off[static_cast<size_t>(k) * wp.m_eff];
    }
    com.mec = sol.bits.mec[0];

    CMat s1 = sol.wpt.covariance(0, Nt);
    s1.symmetrize_hermitian();
    res.trajectory.set_covariance(i0, s1);
    for (int k = 0; k < K; ++k) {
      res.trajectory.local(k, i0) = com.loc[k];
      res.trajectory.offload(k, i0) = com.off[k];
    }
    res.trajectory.mec_bits[i0] = com.mec;

    // Realized energy bank from committed decisions under the true channels.
    double slot_energy = p.slot_duration * s1.trace_real() +
                         mec_energy(com.mec, p.ap_capacitance, p.ap_cycles_per_bit,
                                    p.slot_duration);
    for (int k = 0; k < K; ++k) {
      const double harvested =
          harvested_energy(s1, scen_true.h(k, i0), p.harvest_efficiency[k], p.slot_duration);
      double consumed = local_energy(com.loc[k], p.user_capacitance[k],
                                     p.user_cycles_per_bit[k], p.slot_duration);
      if (com.off[k] > 0.0)
        consumed += offload_energy_gain(com.off[k], scen_true.g_gain(k, i0), p.noise_power,
                                        p.bandwidth, p.slot_duration);
      state.energy_bank[k] = std::max(0.0, state.energy_bank[k] + harvested - consumed);
    }

    std::vector<double> arr_col(K);
    for (int k = 0; k < K; ++k) arr_col[k] = scen_true.arrival(k, i0);
    OnlineState next = update_residuals(state, com, arr_col, tol_bits);
    next.energy_bank = state.energy_bank;

    SlotLog log;
    log.slot = i0;
    log.m_eff = wp.m_eff;
    for (int k = 0; k < K; ++k) {
      log.committed_loc += com.loc[k];
      log.committed_off += com.off[k];
    }
    log.committed_mec = com.mec;
    log.slot_energy = slot_energy;
    for (double r : next.residual_user) log.residual_user += r;
    log.residual_mec = next.residual_mec;
    log.converged = sol.converged;
    res.logs.push_back(log);
    res.converged = res.converged && sol.converged;

    state = next;
  }

  // Structural zeros must hold exactly on the realized trajectory.
  res.trajectory.mec_bits[0] = 0.0;
  for (int k = 0; k < K; ++k) res.trajectory.offload(k, N - 1) = 0.0;
  res.realized_objective = total_objective(res.trajectory, p);
  return res;
}

}  // namespace wpmec
