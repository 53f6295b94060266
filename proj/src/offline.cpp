// SPDX-License-Identifier: Apache-2.0

#include "wpmec/offline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace wpmec {

namespace {

// Reduce a prefix [0..t] of a nondecreasing sequence by `excess` in total by
// clipping it from above to a common level; keeps the sequence nondecreasing.
void floor_clip_prefix(std::vector<double>& v, int t, double excess) {
  if (excess <= 0.0) return;
  double hi_level = 0.0, total = 0.0;
  for (int j = 0; j <= t; ++j) {
    hi_level = std::max(hi_level, v[j]);
    total += v[j];
  }
  const double keep = std::max(0.0, total - excess);
  double lo = 0.0, hi = hi_level;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double s = 0.0;
    for (int j = 0; j <= t; ++j) s += std::min(v[j], mid);
    if (s > keep)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 1e-15 * (hi_level + 1.0)) break;
  }
  const double level = lo;
  for (int j = 0; j <= t; ++j) v[j] = std::min(v[j], level);
}

// Remove `excess` from the whole sequence by clipping its largest values
// down to a common ceiling; keeps a nondecreasing sequence nondecreasing.
void ceiling_clip(std::vector<double>& v, double excess) {
  if (excess <= 0.0) return;
  double hi_level = 0.0, total = 0.0;
  for (double x : v) {
    hi_level = std::max(hi_level, x);
    total += x;
  }
  const double keep = std::max(0.0, total - excess);
  double lo = 0.0, hi = hi_level;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double s = 0.0;
    for (double xv : v) s += std::min(xv, mid);
    if (s > keep)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= 1e-15 * (hi_level + 1.0)) break;
  }
  for (double& xv : v) xv = std::min(xv, lo);
}

// Feasibility repair of the closed-form candidates.  All adjustments keep
// the local and MEC sequences monotone: prefix over-execution is removed by
// clipping the prefix to a common level, deadline deficits are added at the
// final slot, deadline surpluses are removed from the top.
void repair_bits(const DualProblem& dp, BitCandidates& bits) {
  const int K = dp.K, T = dp.T;
  for (int k = 0; k < K; ++k) {
    const size_t row = static_cast<size_t>(k) * T;
    std::vector<double> loc(bits.loc.begin() + row, bits.loc.begin() + row + T);
    std::vector<double> off(bits.off.begin() + row, bits.off.begin() + row + T);
    for (int t = 0; t < T; ++t) {
      if (!dp.loc_on(t)) loc[t] = 0.0;
      if (!dp.off_on(t)) off[t] = 0.0;
    }

    // Task causality on every strict prefix.
    double cum_arr = 0.0;
    for (int t = 0; t < T - 1; ++t) {
      cum_arr += dp.A(k, t);
      double cum_exec = 0.0;
      for (int j = 0; j <= t; ++j) cum_exec += loc[j] + off[j];
      double excess = cum_exec - cum_arr;
      if (excess <= 0.0) continue;
      // Shrink offloads first (latest prefix slot first), then clip local.
      for (int j = t; j >= 0 && excess > 0.0; --j) {
        const double cut = std::min(off[j], excess);
        off[j] -= cut;
        excess -= cut;
      }
      floor_clip_prefix(loc, t, excess);
    }

    // Deadline: executed bits must match total arrivals exactly.
    cum_arr += dp.A(k, T - 1);
    double cum_exec = 0.0;
    for (int t = 0; t < T; ++t) cum_exec += loc[t] + off[t];
    double diff = cum_arr - cum_exec;
    if (diff > 0.0) {
      if (dp.loc_on(T - 1))
        loc[T - 1] += diff;
      else if (dp.off_on(T - 1))
        off[T - 1] += diff;
      else
        throw std::logic_error("repair_bits: no variable can absorb the deadline deficit");
    } else if (diff < 0.0) {
      double surplus = -diff;
      double loc_total = 0.0;
      for (double v : loc) loc_total += v;
      const double from_loc = std::min(surplus, loc_total);
      ceiling_clip(loc, from_loc);
      surplus -= from_loc;
      for (int j = T - 1; j >= 0 && surplus > 0.0; --j) {
        const double cut = std::min(off[j], surplus);
        off[j] -= cut;
        surplus -= cut;
      }
    }
    std::copy(loc.begin(), loc.end(), bits.loc.begin() + row);
    std::copy(off.begin(), off.end(), bits.off.begin() + row);
  }

  // AP side with the final offloads fixed.
  if (dp.enable_off) {
    std::vector<double> mec = bits.mec;
    for (int t = 0; t < T; ++t)
      if (!dp.mec_on(t)) mec[t] = 0.0;
    std::vector<double> avail(T, 0.0);  // offloads executable by slot t
    double cum_off = 0.0;
    for (int t = 0; t < T; ++t) {
      avail[t] = dp.r_mec + cum_off;
      for (int k = 0; k < K; ++k) cum_off += bits.off[static_cast<size_t>(k) * T + t];
    }
    for (int t = 0; t < T - 1; ++t) {
      double cum_mec = 0.0;
      for (int j = 0; j <= t; ++j) cum_mec += mec[j];
      floor_clip_prefix(mec, t, cum_mec - avail[t]);
    }
    double cum_mec = 0.0;
    for (int t = 0; t < T; ++t) cum_mec += mec[t];
    const double diff = avail[T - 1] - cum_mec;
    if (diff > 0.0) {
      if (!dp.mec_on(T - 1))
        throw std::logic_error("repair_bits: MEC deadline deficit with execution disabled");
      mec[T - 1] += diff;
    } else if (diff < 0.0) {
      ceiling_clip(mec, -diff);
    }
    bits.mec = mec;
  } else {
    std::fill(bits.mec.begin(), bits.mec.end(), 0.0);
    std::fill(bits.off.begin(), bits.off.end(), 0.0);
  }
}

}  // namespace

BlockSolution solve_block(const DualProblem& dp, const OfflineOptions& opts) {
  BlockSolution out;
  const int K = dp.K, T = dp.T, Nt = dp.Nt;

  double total_arr = 0.0;
  for (double a : dp.arr) total_arr += a;
  if (total_arr <= 0.0 && dp.r_mec <= 0.0) {
    out.bits.K = K;
    out.bits.T = T;
    out.bits.mec.assign(T, 0.0);
    out.bits.loc.assign(static_cast<size_t>(K) * T, 0.0);
    out.bits.off.assign(static_cast<size_t>(K) * T, 0.0);
    out.covariances.assign(static_cast<size_t>(T) * Nt * Nt, cxd(0.0));
    out.converged = true;
    out.dual = DualVariables::zero(K, T);
    return out;
  }

  const bool use_fast = opts.engine == DualEngine::Fast ||
                        (opts.engine == DualEngine::Auto && dp.n() > opts.auto_fast_threshold);
  DualSolveResult ds;
  if (use_fast) {
    FastDualOptions fo;
    fo.max_iters = opts.fast_iters;
    ds = fast_maximize(dp, fo);
  } else {
    EllipsoidOptions eo;
    eo.target_accuracy = opts.eps_abs > 0.0 ? opts.eps_abs : opts.eps_rel * dp.obj_scale;
    eo.max_iterations = opts.max_iterations;
    eo.initial_radius = opts.initial_radius;
    eo.eps_lambda_rel = opts.eps_lambda_rel;
    eo.log_every = opts.log_every;
    ds = ellipsoid_maximize(dp, eo);
  }

  out.dual = ds.dv;
  out.dual_value = ds.dual_value;
  out.dual_iterations = ds.iterations;
  out.bits = ds.candidates;
  repair_bits(dp, out.bits);

  // Energy demand profile induced by the repaired bits (bank deducted).
  EnergyDemandProfile dem = EnergyDemandProfile::zero(K, T);
  for (int k = 0; k < K; ++k) {
    double cum = -dp.bank[k];
    for (int t = 0; t < T; ++t) {
      const size_t row = static_cast<size_t>(k) * T;
      const double lloc = out.bits.loc[row + t];
      cum += dp.a_loc[k] * lloc * lloc * lloc;
      if (out.bits.off[row + t] > 0.0)
        cum += offload_energy_gain(out.bits.off[row + t], dp.G2(k, t), dp.sigma2, dp.B, dp.tau);
      dem.at(k, t) = std::max(0.0, cum);
    }
  }

  WptChannels wch{K, T, Nt, dp.hch.data()};
  out.wpt = min_power_wpt(dem, wch, dp.eta, dp.tau, opts.wpt_tol);
  out.covariances = out.wpt.covariances;

  out.objective = out.wpt.total_energy;
  for (int t = 0; t < T; ++t)
    out.objective += dp.a_mec * out.bits.mec[t] * out.bits.mec[t] * out.bits.mec[t];
  out.gap = out.objective - out.dual_value;
  out.converged = ds.converged && out.wpt.converged;
  return out;
}

OfflineSolution solve_offline(const Scenario& scen, const SystemParams& p,
                              const OfflineOptions& opts) {
  scen.validate(p);
  DualProblem dp = DualProblem::offline(scen, p);
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

std::vector<int> causality_dominating_slots(std::span<const double> h_gains) {
  if (h_gains.empty()) throw std::invalid_argument("causality_dominating_slots: empty input");
  std::vector<int> idx(h_gains.size());
  int arg = 0;
  double best = h_gains[0];
  for (size_t i = 0; i < h_gains.size(); ++i) {
    if (h_gains[i] > best) {  // strict: earliest slot wins ties
      best = h_gains[i];
      arg = static_cast<int>(i);
    }
    idx[i] = arg;
  }
  return idx;
}

SingleUserWpt recover_single_user_wpt(const std::vector<double>& l_loc,
                                      const std::vector<double>& l_off, const Scenario& scen,
                                      const SystemParams& p) {
  if (scen.K != 1) throw std::invalid_argument("recover_single_user_wpt: requires K = 1");
  const int N = scen.N, Nt = scen.Nt;
  std::vector<double> gains(N);
  for (int i = 0; i < N; ++i) gains[i] = scen.h_gain(0, i);
  const std::vector<int> dom = causality_dominating_slots(gains);

  std::vector<double> demand(N, 0.0);
  for (int i = 0; i < N; ++i) {
    demand[i] = local_energy(l_loc[i], p.user_capacitance[0], p.user_cycles_per_bit[0],
                             p.slot_duration);
    if (l_off[i] > 0.0)
      demand[i] += offload_energy_gain(l_off[i], scen.g_gain(0, i), p.noise_power, p.bandwidth,
                                       p.slot_duration);
  }

  SingleUserWpt out;
  out.covariances.assign(static_cast<size_t>(N) * Nt * Nt, cxd(0.0));
  out.powers.assign(N, 0.0);
  const double eta = p.harvest_efficiency[0];
  for (int s = 0; s < N; ++s) {
    if (dom[s] != s) continue;  // not a dominating slot
    double agg = 0.0;
    for (int j = s; j < N && dom[j] == s; ++j) agg += demand[j];
    if (agg <= 0.0) continue;
    const double power = agg / (p.slot_duration * eta * gains[s]);
    out.powers[s] = power;
    const CMat cov = mrc_covariance(scen.h(0, s), power);
    std::copy(cov.data(), cov.data() + static_cast<size_t>(Nt) * Nt,
              out.covariances.data() + static_cast<size_t>(s) * Nt * Nt);
  }
  return out;
}

MonotonicityReport verify_monotonicity(const Allocation& alloc, double tol) {
  MonotonicityReport r;
  for (int k = 0; k < alloc.K; ++k)
    for (int i = 0; i + 1 < alloc.N; ++i)
      if (alloc.local(k, i) > alloc.local(k, i + 1) + tol) {
        r.ok = false;
        r.user = k;
        r.slot = i + 1;
        r.amount = alloc.local(k, i) - alloc.local(k, i + 1);
        return r;
      }
  for (int i = 1; i + 1 < alloc.N; ++i)
    if (alloc.mec_bits[i] > alloc.mec_bits[i + 1] + tol) {
      r.ok = false;
      r.user = -1;
      r.slot = i + 1;
      r.amount = alloc.mec_bits[i] - alloc.mec_bits[i + 1];
      return r;
    }
  return r;
}

std::string solution_to_json(const OfflineSolution& sol) {
  using nlohmann::json;
  const Allocation& a = sol.allocation;
  json cov = json::array();
  for (const cxd& z : a.covariances) cov.push_back({z.real(), z.imag()});
  json j{{"objective", sol.objective},
         {"dual_value", sol.dual_value},
         {"duality_gap", sol.duality_gap},
         {"converged", sol.converged},
         {"dual_iterations", sol.dual_iterations},
         {"num_users", a.K},
         {"num_slots", a.N},
         {"num_antennas", a.Nt},
         {"mec_bits", a.mec_bits},
         {"local_bits", a.local_bits},
         {"offload_bits", a.offload_bits},
         {"covariances", cov}};
  std::vector<double> powers(a.N);
  for (int i = 0; i < a.N; ++i) powers[i] = a.covariance(i).trace_real();
  j["slot_powers"] = powers;
  j["feasible"] = sol.feasibility.feasible;
  return j.dump(2);
}

}  // namespace wpmec
