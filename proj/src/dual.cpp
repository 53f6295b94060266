// SPDX-License-Identifier: Apache-2.0

#include "wpmec/dual.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace wpmec {

namespace {
constexpr double kLn2 = 0.6931471805599453094;
constexpr double kHuge = 1e300;
}  // namespace

DualVariables DualVariables::zero(int K, int T) {
  DualVariables dv;
  dv.K = K;
  dv.T = T;
  dv.lambda.assign(static_cast<size_t>(K) * T, 0.0);
  dv.mu.assign(static_cast<size_t>(K) * T, 0.0);
  dv.nu.assign(T, 0.0);
  return dv;
}

DualTailSums DualTailSums::from(const DualVariables& dv) {
  DualTailSums ts;
  ts.K = dv.K;
  ts.T = dv.T;
  ts.Lambda.assign(dv.lambda.size(), 0.0);
  ts.Mu.assign(dv.mu.size(), 0.0);
  ts.Nu.assign(dv.nu.size(), 0.0);
  for (int k = 0; k < dv.K; ++k) {
    double sl = 0.0, sm = 0.0;
    for (int t = dv.T - 1; t >= 0; --t) {
      sl += dv.l(k, t);
      sm += dv.m(k, t);
      ts.Lambda[static_cast<size_t>(k) * dv.T + t] = sl;
      ts.Mu[static_cast<size_t>(k) * dv.T + t] = sm;
    }
  }
  double sv = 0.0;
  for (int t = dv.T - 1; t >= 0; --t) {
    sv += dv.nu[t];
    ts.Nu[t] = sv;
  }
  return ts;
}

// --- closed forms ---

double solve_mec_subproblem_scalar(double v_tail, double a_mec) {
  if (v_tail >= 0.0) return 0.0;
  return std::sqrt(-v_tail / (3.0 * a_mec));
}

std::vector<double> solve_mec_subproblem(const std::vector<double>& v_tails, double zeta0,
                                         double C0, double tau) {
  const double a = zeta0 * C0 * C0 * C0 / (tau * tau);
  std::vector<double> l(v_tails.size(), 0.0);
  for (size_t i = 1; i < v_tails.size(); ++i) l[i] = solve_mec_subproblem_scalar(v_tails[i], a);
  return l;
}

double solve_loc_subproblem(double lambda_tail, double mu_tail, double zeta, double C,
                            double tau) {
  if (!(lambda_tail > 0.0))
    throw std::invalid_argument("solve_loc_subproblem: lambda tail must be positive");
  if (mu_tail >= 0.0) return 0.0;
  const double a = zeta * C * C * C / (tau * tau);
  return std::sqrt(-mu_tail / (3.0 * a * lambda_tail));
}

double solve_off_subproblem(double lambda_tail, double mu_tail, double nu_tail, double g_gain,
                            double sigma2, double bandwidth, double tau) {
  if (!(lambda_tail > 0.0))
    throw std::invalid_argument("solve_off_subproblem: lambda tail must be positive");
  if (!(g_gain > 0.0)) throw std::invalid_argument("solve_off_subproblem: zero channel");
  const double thr = sigma2 * kLn2 / (bandwidth * g_gain);
  const double drive = nu_tail - mu_tail;
  if (drive <= lambda_tail * thr) return 0.0;
  return tau * bandwidth * std::log2(drive / (lambda_tail * thr));
}

// --- DualProblem ---

DualProblem DualProblem::offline(const Scenario& scen, const SystemParams& p) {
  DualProblem dp;
  dp.K = scen.K;
  dp.T = scen.N;
  dp.Nt = scen.Nt;
  dp.tau = p.slot_duration;
  dp.B = p.bandwidth;
  dp.sigma2 = p.noise_power;
  dp.eta = p.harvest_efficiency;
  dp.a_loc.resize(dp.K);
  for (int k = 0; k < dp.K; ++k) dp.a_loc[k] = p.a_user(k);
  dp.a_mec = p.a_ap();
  dp.arr = scen.arrivals;
  dp.hch = scen.wpt_channels;
  dp.g2.resize(static_cast<size_t>(dp.K) * dp.T);
  dp.h2.resize(static_cast<size_t>(dp.K) * dp.T);
  for (int k = 0; k < dp.K; ++k)
    for (int t = 0; t < dp.T; ++t) {
      dp.g2[static_cast<size_t>(k) * dp.T + t] = scen.g_gain(k, t);
      dp.h2[static_cast<size_t>(k) * dp.T + t] = scen.h_gain(k, t);
    }
  dp.bank.assign(dp.K, 0.0);
  dp.r_mec = 0.0;
  dp.mec_first_slot = false;
  dp.pin_off_last = true;
  dp.enable_off = true;
  dp.loc_enabled.assign(dp.T, 1);
  return dp;
}

void DualProblem::finalize(double eps_lambda_rel) {
  s_lambda.resize(K);
  double s_min = std::numeric_limits<double>::max();
  double mu_scale = 0.0;
  for (int k = 0; k < K; ++k) {
    double h2max = 0.0, g2min = std::numeric_limits<double>::max(), asum = 0.0;
    for (int t = 0; t < T; ++t) {
      h2max = std::max(h2max, h2[static_cast<size_t>(k) * T + t]);
      g2min = std::min(g2min, g2[static_cast<size_t>(k) * T + t]);
      asum += A(k, t);
    }
    s_lambda[k] = 1.0 / (eta[k] * h2max);
    s_min = std::min(s_min, s_lambda[k]);
    const double lbar = std::max(1.0, asum / T);
    double marg = 3.0 * a_loc[k] * lbar * lbar;
    if (enable_off) {
      const double thr = sigma2 * kLn2 / (B * g2min);
      marg = std::max(marg, thr * exp2_clamped(lbar / (tau * B)));
    }
    mu_scale = std::max(mu_scale, s_lambda[k] * marg);
  }
  s_mu = std::max(mu_scale, 1e-300);
  double total = 0.0;
  for (double a : arr) total += a;
  total += r_mec;
  for (double b : bank) total = std::max(total, b > 0 ? total : total);
  const double lbar_mec = std::max(1.0, total / T);
  s_nu = std::max(s_mu, 3.0 * a_mec * lbar_mec * lbar_mec);
  eps_lambda = eps_lambda_rel * s_min;

  // Crude objective upper bounds from the pure strategies available.
  double loc_bound = std::numeric_limits<double>::max();
  bool loc_everywhere = true;
  for (int t = 0; t < T; ++t) loc_everywhere = loc_everywhere && loc_on(t);
  if (loc_everywhere) {
    loc_bound = 0.0;
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < T; ++t) {
        const double l = A(k, t);
        loc_bound += a_loc[k] * l * l * l * s_lambda[k];
      }
  }
  double off_bound = std::numeric_limits<double>::max();
  if (enable_off && T >= 2) {
    off_bound = 0.0;
    for (int t = 0; t < T; ++t) {
      double mec_load = 0.0;
      for (int k = 0; k < K; ++k) {
        const double thr_e = tau * sigma2 *
                             (exp2_clamped(A(k, t) / (tau * B)) - 1.0) /
                             g2[static_cast<size_t>(k) * T + t];
        off_bound += thr_e * s_lambda[k];
        mec_load += A(k, t);
      }
      off_bound += a_mec * mec_load * mec_load * mec_load;
    }
  }
  obj_scale = std::max(1e-12, std::min(loc_bound, off_bound));
  if (!std::isfinite(obj_scale)) obj_scale = 1e-12;
}

std::vector<double> DualProblem::pack(const DualVariables& dv) const {
  std::vector<double> x(n());
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) x[static_cast<size_t>(k) * T + t] = dv.l(k, t) / s_lambda[k];
  const size_t mu0 = static_cast<size_t>(K) * T;
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) x[mu0 + static_cast<size_t>(k) * T + t] = dv.m(k, t) / s_mu;
  if (enable_off) {
    const size_t nu0 = 2 * mu0;
    for (int t = 0; t < T; ++t) x[nu0 + t] = dv.nu[t] / s_nu;
  }
  return x;
}

DualVariables DualProblem::unpack(const std::vector<double>& x) const {
  DualVariables dv = DualVariables::zero(K, T);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) dv.l(k, t) = x[static_cast<size_t>(k) * T + t] * s_lambda[k];
  const size_t mu0 = static_cast<size_t>(K) * T;
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) dv.m(k, t) = x[mu0 + static_cast<size_t>(k) * T + t] * s_mu;
  if (enable_off) {
    const size_t nu0 = 2 * mu0;
    for (int t = 0; t < T; ++t) dv.nu[t] = x[nu0 + t] * s_nu;
  }
  return dv;
}

double DualProblem::eval_tails(const std::vector<double>& Lambda, const std::vector<double>& Mu,
                               const std::vector<double>& Nu, BitCandidates* cand) const {
  if (cand) {
    cand->K = K;
    cand->T = T;
    cand->mec.assign(T, 0.0);
    cand->loc.assign(static_cast<size_t>(K) * T, 0.0);
    cand->off.assign(static_cast<size_t>(K) * T, 0.0);
  }
  auto Vt = [&](int t) { return (enable_off && t < T) ? Nu[t] : 0.0; };

  double val = 0.0;
  if (enable_off) {
    for (int t = 0; t < T; ++t) {
      if (!mec_on(t)) continue;
      const double v = Vt(t);
      if (v < 0.0) {
        const double l = std::sqrt(-v / (3.0 * a_mec));
        val += (2.0 / 3.0) * v * l;
        if (cand) cand->mec[t] = l;
      }
    }
    val -= Vt(0) * r_mec;
  }
  for (int k = 0; k < K; ++k) {
    const size_t row = static_cast<size_t>(k) * T;
    for (int t = 0; t < T; ++t) {
      const double L = Lambda[row + t];
      const double M = Mu[row + t];
      if (loc_on(t) && M < 0.0) {
        const double l = std::sqrt(-M / (3.0 * a_loc[k] * L));
        val += (2.0 / 3.0) * M * l;
        if (cand) cand->loc[row + t] = l;
      }
      if (off_on(t)) {
        const double drive = Vt(t + 1) - M;
        const double thr = sigma2 * kLn2 / (B * g2[row + t]);
        if (drive > L * thr) {
          const double rho = drive / (L * thr);
          const double l = tau * B * std::log2(rho);
          val += L * tau * sigma2 * (rho - 1.0) / g2[row + t] - drive * l;
          if (cand) cand->off[row + t] = l;
        }
      }
      val -= M * A(k, t);
    }
    val -= Lambda[row] * bank[k];
  }
  return val;
}

double DualProblem::eval(const DualVariables& dv, BitCandidates* cand) const {
  const DualTailSums ts = DualTailSums::from(dv);
  return eval_tails(ts.Lambda, ts.Mu, ts.Nu, cand);
}

std::vector<double> DualProblem::subgradient(const DualVariables& dv,
                                             const BitCandidates& cand) const {
  (void)dv;
  std::vector<double> g(n(), 0.0);
  const size_t mu0 = static_cast<size_t>(K) * T;
  for (int k = 0; k < K; ++k) {
    const size_t row = static_cast<size_t>(k) * T;
    double cum_e = 0.0, cum_exec = 0.0, cum_arr = 0.0;
    for (int t = 0; t < T; ++t) {
      cum_e += a_loc[k] * cand.loc[row + t] * cand.loc[row + t] * cand.loc[row + t];
      if (cand.off[row + t] > 0.0)
        cum_e += tau * sigma2 * (exp2_clamped(cand.off[row + t] / (tau * B)) - 1.0) /
                 g2[row + t];
      g[row + t] = cum_e - bank[k];
      cum_exec += cand.loc[row + t] + cand.off[row + t];
      cum_arr += A(k, t);
      g[mu0 + row + t] = cum_exec - cum_arr;
    }
  }
  if (enable_off) {
    const size_t nu0 = 2 * mu0;
    double cum_mec = 0.0, cum_off_prev = 0.0;
    for (int t = 0; t < T; ++t) {
      cum_mec += cand.mec[t];
      g[nu0 + t] = cum_mec - cum_off_prev - r_mec;
      for (int k = 0; k < K; ++k) cum_off_prev += cand.off[static_cast<size_t>(k) * T + t];
    }
  }
  return g;
}

// --- feasibility cuts ---

std::optional<FeasibilityCut> feasibility_cut_packed(const DualProblem& dp,
                                                     const std::vector<double>& x) {
  const int K = dp.K, T = dp.T;
  const size_t mu0 = static_cast<size_t>(K) * T;
  const size_t nu0 = 2 * mu0;
  auto unit_cut = [&](CutKind kind, int k, int t, size_t idx) {
    FeasibilityCut c;
    c.kind = kind;
    c.user = k;
    c.slot = t;
    c.g.assign(dp.n(), 0.0);
    c.g[idx] = 1.0;
    return c;
  };

  // Sign constraints.
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t)
      if (x[static_cast<size_t>(k) * T + t] < 0.0)
        return unit_cut(CutKind::SignLambda, k, t, static_cast<size_t>(k) * T + t);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T - 1; ++t)
      if (x[mu0 + static_cast<size_t>(k) * T + t] < 0.0)
        return unit_cut(CutKind::SignMu, k, t, mu0 + static_cast<size_t>(k) * T + t);
  if (dp.enable_off)
    for (int t = 0; t < T - 1; ++t)
      if (x[nu0 + t] < 0.0) return unit_cut(CutKind::SignNu, -1, t, nu0 + t);

  // Tail-sum floors reduce to the last-slot multiplier.
  for (int k = 0; k < K; ++k) {
    const double last = x[static_cast<size_t>(k) * T + (T - 1)] * dp.s_lambda[k];
    if (last < dp.eps_lambda * (1.0 - 1e-12))
      return unit_cut(CutKind::LambdaFloor, k, T - 1, static_cast<size_t>(k) * T + (T - 1));
  }

  // PSD of the per-slot certificates H_t = I - sum_k Lambda[k][t] eta_k h h^H.
  std::vector<double> Lt(K);
  std::vector<cxd> evec;
  for (int t = 0; t < T; ++t) {
    double bound = 0.0;
    for (int k = 0; k < K; ++k) {
      double tail = 0.0;
      for (int j = t; j < T; ++j) tail += x[static_cast<size_t>(k) * T + j];
      Lt[k] = tail * dp.s_lambda[k];
      bound += Lt[k] * dp.eta[k] * dp.h2[static_cast<size_t>(k) * T + t];
    }
    if (bound <= 1.0) continue;  // PSD guaranteed, skip the eigensolve
    CMat hmat = CMat::identity(dp.Nt);
    for (int k = 0; k < K; ++k) hmat.add_rank1(dp.h(k, t), -Lt[k] * dp.eta[k]);
    const double lmin = min_eig(hmat, &evec);
    if (lmin < 0.0) {
      FeasibilityCut c;
      c.kind = CutKind::Psd;
      c.user = -1;
      c.slot = t;
      c.g.assign(dp.n(), 0.0);
      for (int k = 0; k < K; ++k) {
        const double w = -dp.eta[k] * std::norm(dot_conj(evec, dp.h(k, t)));
        for (int j = t; j < T; ++j)
          c.g[static_cast<size_t>(k) * T + j] = w * dp.s_lambda[k];
      }
      return c;
    }
  }
  return std::nullopt;
}

// --- ellipsoid ---

DualSolveResult ellipsoid_maximize(const DualProblem& dp, const EllipsoidOptions& opts) {
  const int n = dp.n();
  DualSolveResult res;

  // Spec'd initialization: small uniform lambda keeping every certificate PSD.
  DualVariables dv0 = DualVariables::zero(dp.K, dp.T);
  double h2max = 0.0, eta_max = 0.0;
  for (int k = 0; k < dp.K; ++k) {
    eta_max = std::max(eta_max, dp.eta[k]);
    for (int t = 0; t < dp.T; ++t)
      h2max = std::max(h2max, dp.h2[static_cast<size_t>(k) * dp.T + t]);
  }
  const double lam0 = opts.initial_center / (static_cast<double>(dp.T) * dp.K * eta_max * h2max);
  for (double& v : dv0.lambda) v = lam0;

  std::vector<double> x = dp.pack(dv0);
  const double radius = opts.initial_radius > 0.0 ? opts.initial_radius
                                                  : 30.0 * std::sqrt(static_cast<double>(n));
  std::vector<double> P(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) P[static_cast<size_t>(i) * n + i] = radius * radius;
  double lndet = 2.0 * n * std::log(radius);
  // Every central cut shrinks det(P) by the same constant factor.
  const double lndet_step = n * std::log(static_cast<double>(n) * n / (static_cast<double>(n) * n - 1.0)) +
                            std::log((n - 1.0) / (n + 1.0));

  const double eps = opts.target_accuracy > 0.0 ? opts.target_accuracy
                                                : opts.target_accuracy_rel * dp.obj_scale;
  const long max_iter =
      opts.max_iterations > 0 ? opts.max_iterations : 2000 + 40L * n * n;

  double best = -std::numeric_limits<double>::infinity();
  double ub = std::numeric_limits<double>::infinity();
  long last_improve = 0;
  double lips = 0.0;

  std::vector<double> pg(n), gdir(n);
  BitCandidates cand;
  long iter = 0;
  for (; iter < max_iter; ++iter) {
    char cut_type = 'f';
    double value = 0.0, bound = 0.0;
    auto cut = feasibility_cut_packed(dp, x);
    if (cut) {
      // Keep the half-space g.(z-x) >= 0.
      for (int i = 0; i < n; ++i) gdir[i] = -cut->g[i];
    } else {
      cut_type = 'o';
      const DualVariables dv = dp.unpack(x);
      value = dp.eval(dv, &cand);
      // Supergradient in scaled coordinates.
      std::vector<double> s = dp.subgradient(dv, cand);
      const size_t mu0 = static_cast<size_t>(dp.K) * dp.T;
      for (int k = 0; k < dp.K; ++k)
        for (int t = 0; t < dp.T; ++t) {
          s[static_cast<size_t>(k) * dp.T + t] *= dp.s_lambda[k];
          s[mu0 + static_cast<size_t>(k) * dp.T + t] *= dp.s_mu;
        }
      if (dp.enable_off)
        for (int t = 0; t < dp.T; ++t) s[2 * mu0 + t] *= dp.s_nu;

      double snorm2 = 0.0;
      for (int i = 0; i < n; ++i) snorm2 += s[i] * s[i];
      lips = std::max(lips, std::sqrt(snorm2));

      // bound = sqrt(s' P s)
      double spept = 0.0;
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* row = P.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) acc += row[j] * s[j];
        pg[i] = acc;
        spept += acc * s[i];
      }
      bound = std::sqrt(std::max(0.0, spept));
      if (value > best) {
        best = value;
        res.dv = dv;
        res.candidates = cand;
        last_improve = iter;
      }
      ub = std::min(ub, value + bound);
      if (opts.log_every > 0 && iter % opts.log_every == 0)
        res.log.push_back({iter, value, bound, cut_type});
      if (ub - best <= eps && iter - last_improve >= opts.stagnation_window) {
        res.converged = true;
        ++iter;
        break;
      }
      for (int i = 0; i < n; ++i) gdir[i] = -s[i];
    }
    if (cut && opts.log_every > 0 && iter % opts.log_every == 0)
      res.log.push_back({iter, best, ub - best, cut_type});

    // Central-cut update.
    double gpg = 0.0;
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      const double* row = P.data() + static_cast<size_t>(i) * n;
      for (int j = 0; j < n; ++j) acc += row[j] * gdir[j];
      pg[i] = acc;
      gpg += acc * gdir[i];
    }
    if (!(gpg > 0.0) || !std::isfinite(gpg)) break;  // degenerate ellipsoid
    const double gamma = std::sqrt(gpg);
    const double nn = static_cast<double>(n);
    for (int i = 0; i < n; ++i) x[i] -= pg[i] / ((nn + 1.0) * gamma);
    const double c1 = nn * nn / (nn * nn - 1.0);
    const double c2 = 2.0 / (nn + 1.0) / gpg;
    for (int i = 0; i < n; ++i) {
      double* row = P.data() + static_cast<size_t>(i) * n;
      const double pgi = pg[i];
      for (int j = 0; j < n; ++j) row[j] = c1 * (row[j] - c2 * pgi * pg[j]);
    }
    lndet += lndet_step;
    if ((iter & 63) == 0) {  // re-symmetrize against drift
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) {
          const double avg = 0.5 * (P[static_cast<size_t>(i) * n + j] +
                                    P[static_cast<size_t>(j) * n + i]);
          P[static_cast<size_t>(i) * n + j] = avg;
          P[static_cast<size_t>(j) * n + i] = avg;
        }
    }
  }
  res.iterations = iter;
  res.dual_value = best;
  res.gap_bound = ub - best;
  res.lndet_shape = lndet;
  {
    // Direct log-det of P via real Cholesky for the volume-identity check.
    std::vector<double> fac = P;
    double direct = 0.0;
    bool ok = true;
    for (int c = 0; c < n && ok; ++c) {
      double d = fac[static_cast<size_t>(c) * n + c];
      for (int k2 = 0; k2 < c; ++k2) {
        const double v = fac[static_cast<size_t>(c) * n + k2];
        d -= v * v;
      }
      if (!(d > 0.0)) {
        ok = false;
        break;
      }
      const double l = std::sqrt(d);
      direct += 2.0 * std::log(l);
      fac[static_cast<size_t>(c) * n + c] = l;
      for (int r = c + 1; r < n; ++r) {
        double s = fac[static_cast<size_t>(r) * n + c];
        for (int k2 = 0; k2 < c; ++k2)
          s -= fac[static_cast<size_t>(r) * n + k2] * fac[static_cast<size_t>(c) * n + k2];
        fac[static_cast<size_t>(r) * n + c] = s / l;
      }
    }
    res.lndet_shape_direct = ok ? direct : res.lndet_shape;
  }
  res.lipschitz_estimate = opts.lipschitz_bound > 0.0 ? opts.lipschitz_bound : lips;
  if (!std::isfinite(best)) {  // no feasible iterate seen (should not happen)
    res.dv = dv0;
    res.dual_value = dp.eval(dv0, &res.candidates);
  }
  return res;
}

std::string iteration_log_csv(const std::vector<IterLogRow>& log) {
  std::string out = "iter,dual_value,gap_bound,cut_type\n";
  char buf[128];
  for (const IterLogRow& r : log) {
    std::snprintf(buf, sizeof(buf), "%ld,%.9g,%.9g,%c\n", r.iter, r.dual_value, r.gap_bound,
                  r.cut_type);
    out += buf;
  }
  return out;
}

// --- exact inner maximization over the mu block (per user) ---

namespace {

// Total executed bits sum_t (l_loc + l_off) at common tail value m over the
// pooled slots; strictly decreasing in m wherever positive.
struct MuPool {
  const DualProblem* dp;
  int k;
  const double* Lambda;   // tails, row of user k
  const std::vector<double>* Nu;  // tails (empty if !enable_off)

  double V(int t) const {
    return (dp->enable_off && t < dp->T) ? (*Nu)[t] : 0.0;
  }
  double psi_slot(int t, double m) const {
    double tot = 0.0;
    const double L = Lambda[t];
    if (dp->loc_on(t) && m < 0.0) tot += std::sqrt(-m / (3.0 * dp->a_loc[k] * L));
    if (dp->off_on(t)) {
      const double thr =
          dp->sigma2 * kLn2 / (dp->B * dp->g2[static_cast<size_t>(k) * dp->T + t]);
      const double drive = V(t + 1) - m;
      if (drive > L * thr) tot += dp->tau * dp->B * std::log2(drive / (L * thr));
    }
    return tot;
  }
  // Largest m at which slot t still executes nothing (gate); -inf when the
  // slot has no decision variable for this user.
  double gate_slot(int t) const {
    double gate = -std::numeric_limits<double>::infinity();
    bool has = false;
    if (dp->loc_on(t)) {
      gate = std::max(gate, 0.0);
      has = true;
    }
    if (dp->off_on(t)) {
      const double thr =
          dp->sigma2 * kLn2 / (dp->B * dp->g2[static_cast<size_t>(k) * dp->T + t]);
      gate = std::max(gate, V(t + 1) - Lambda[t] * thr);
      has = true;
    }
    return has ? gate : -std::numeric_limits<double>::infinity();
  }
};

double pooled_root(const MuPool& pool, int lo_t, int hi_t, double s_mu) {
  double target = 0.0;
  double gate = -std::numeric_limits<double>::infinity();
  for (int t = lo_t; t <= hi_t; ++t) {
    target += pool.dp->A(pool.k, t);
    gate = std::max(gate, pool.gate_slot(t));
  }
  if (!std::isfinite(gate)) {
    if (target <= 0.0) return kHuge;
    throw std::logic_error("dual: arrivals at a slot with no execution variable");
  }
  if (target <= 0.0) return gate;  // smallest maximizer on the flat region

  auto psi = [&](double m) {
    double tot = 0.0;
    for (int t = lo_t; t <= hi_t; ++t) tot += pool.psi_slot(t, m);
    return tot;
  };
  double step = std::max(s_mu, 1e-280);
  double lo = gate - step;
  for (int guard = 0; guard < 4000 && psi(lo) < target; ++guard) {
    step *= 2.0;
    lo = gate - step;
    if (!(lo > -1e305)) break;
  }
  double hi = gate;
  for (int it = 0; it < 240; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (psi(mid) >= target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-14 * (std::abs(hi) + std::abs(lo) + s_mu)) break;
  }
  return 0.5 * (lo + hi);
}

// Maximize sum_t f_t(m_t) subject to m_0 >= m_1 >= ... >= m_{T-1} by
// pool-adjacent-violators; returns the optimal tails.
void pav_mu_tails(const DualProblem& dp, int k, const double* Lambda,
                  const std::vector<double>& Nu, double* m_out) {
  MuPool pool{&dp, k, Lambda, &Nu};
  struct Block {
    int start, end;
    double value;
  };
  std::vector<Block> stack;
  stack.reserve(dp.T);
  for (int t = 0; t < dp.T; ++t) {
    Block b{t, t, pooled_root(pool, t, t, dp.s_mu)};
    stack.push_back(b);
    while (stack.size() >= 2 && stack[stack.size() - 1].value > stack[stack.size() - 2].value) {
      Block top = stack.back();
      stack.pop_back();
      Block& prev = stack.back();
      prev.end = top.end;
      prev.value = pooled_root(pool, prev.start, prev.end, dp.s_mu);
    }
  }
  // Leading all-flat blocks inherit the next finite level.
  for (size_t b = stack.size(); b-- > 0;) {
    if (stack[b].value >= kHuge)
      stack[b].value = (b + 1 < stack.size()) ? std::max(0.0, stack[b + 1].value) : 0.0;
  }
  for (const Block& b : stack)
    for (int t = b.start; t <= b.end; ++t) m_out[t] = b.value;
}

}  // namespace

// --- fast projected quasi-Newton engine ---

DualSolveResult fast_maximize(const DualProblem& dp, const FastDualOptions& opts) {
  const int K = dp.K, T = dp.T;
  const int nf = K * T + (dp.enable_off ? T : 0);
  const size_t nu0 = static_cast<size_t>(K) * T;

  // Scaled variables: lambda block then nu block.  Lower bounds.
  std::vector<double> lo(nf, 0.0);
  for (int k = 0; k < K; ++k)
    lo[static_cast<size_t>(k) * T + (T - 1)] = dp.eps_lambda / dp.s_lambda[k];
  if (dp.enable_off) lo[nu0 + T - 1] = -std::numeric_limits<double>::infinity();

  std::vector<double> x(nf, 0.0);
  const double c0 = std::min(0.3 / K, 0.1);
  for (int k = 0; k < K; ++k) {
    double h2max = 0.0;
    for (int t = 0; t < T; ++t)
      h2max = std::max(h2max, dp.h2[static_cast<size_t>(k) * T + t]);
    const double lam_nat = c0 / (static_cast<double>(T) * dp.eta[k] * h2max);
    for (int t = 0; t < T; ++t)
      x[static_cast<size_t>(k) * T + t] = std::max(lam_nat / dp.s_lambda[k], lo[static_cast<size_t>(k) * T + t]);
  }

  std::vector<double> Lambda(static_cast<size_t>(K) * T), Mu(static_cast<size_t>(K) * T),
      Nu(dp.enable_off ? T : 0);
  std::vector<double> hinge(T, 0.0);
  std::vector<std::vector<cxd>> hvec(T);
  BitCandidates cand;
  long evals = 0;

  auto tails_from = [&](const std::vector<double>& xv) {
    for (int k = 0; k < K; ++k) {
      double s = 0.0;
      for (int t = T - 1; t >= 0; --t) {
        s += std::max(0.0, xv[static_cast<size_t>(k) * T + t]) * dp.s_lambda[k];
        Lambda[static_cast<size_t>(k) * T + t] = std::max(s, dp.eps_lambda);
      }
    }
    if (dp.enable_off) {
      double s = 0.0;
      for (int t = T - 1; t >= 0; --t) {
        const double v = xv[nu0 + t] * dp.s_nu;
        s += (t == T - 1) ? v : std::max(0.0, v);
        Nu[t] = s;
      }
    }
  };

  // Penalized objective (to MINIMIZE): -Gbar + beta * sum hinge^2.
  double beta = 0.0;
  auto eval_f = [&](const std::vector<double>& xv, std::vector<double>* grad) {
    ++evals;
    tails_from(xv);
    for (int k = 0; k < K; ++k)
      pav_mu_tails(dp, k, Lambda.data() + static_cast<size_t>(k) * T, Nu,
                   Mu.data() + static_cast<size_t>(k) * T);
    const double gval = dp.eval_tails(Lambda, Mu, Nu, &cand);

    double pen = 0.0;
    for (int t = 0; t < T; ++t) {
      double bound = 0.0;
      for (int k = 0; k < K; ++k)
        bound += Lambda[static_cast<size_t>(k) * T + t] * dp.eta[k] *
                 dp.h2[static_cast<size_t>(k) * T + t];
      if (bound <= 1.0) {
        hinge[t] = 0.0;
        continue;
      }
      CMat hm = CMat::identity(dp.Nt);
      for (int k = 0; k < K; ++k)
        hm.add_rank1(dp.h(k, t), -Lambda[static_cast<size_t>(k) * T + t] * dp.eta[k]);
      const double lmin = min_eig(hm, &hvec[t]);
      hinge[t] = std::max(0.0, -lmin);
      pen += hinge[t] * hinge[t];
    }
    const double f = -gval + beta * pen;
    if (grad) {
      grad->assign(nf, 0.0);
      // dGbar/dlambda is the cumulative candidate consumption (Danskin).
      for (int k = 0; k < K; ++k) {
        const size_t row = static_cast<size_t>(k) * T;
        double cum_e = 0.0;
        for (int t = 0; t < T; ++t) {
          cum_e += dp.a_loc[k] * cand.loc[row + t] * cand.loc[row + t] * cand.loc[row + t];
          if (cand.off[row + t] > 0.0)
            cum_e += dp.tau * dp.sigma2 *
                     (exp2_clamped(cand.off[row + t] / (dp.tau * dp.B)) - 1.0) /
                     dp.g2[row + t];
          (*grad)[row + t] = -(cum_e - dp.bank[k]) * dp.s_lambda[k];
        }
      }
      if (dp.enable_off) {
        double cum_mec = 0.0, cum_off_prev = 0.0;
        for (int t = 0; t < T; ++t) {
          cum_mec += cand.mec[t];
          (*grad)[nu0 + t] = -(cum_mec - cum_off_prev - dp.r_mec) * dp.s_nu;
          for (int k = 0; k < K; ++k) cum_off_prev += cand.off[static_cast<size_t>(k) * T + t];
        }
      }
      for (int t = 0; t < T; ++t) {
        if (hinge[t] <= 0.0) continue;
        for (int k = 0; k < K; ++k) {
          const double w =
              2.0 * beta * hinge[t] * dp.eta[k] * std::norm(dot_conj(hvec[t], dp.h(k, t)));
          for (int j = t; j < T; ++j)
            (*grad)[static_cast<size_t>(k) * T + j] += w * dp.s_lambda[k];
        }
      }
    }
    return f;
  };

  auto project = [&](std::vector<double>& xv) {
    for (int i = 0; i < nf; ++i)
      if (xv[i] < lo[i]) xv[i] = lo[i];
  };

  const int m_mem = opts.memory;
  std::vector<std::vector<double>> smem, ymem;
  std::vector<double> rho_mem;
  std::vector<double> g(nf), gnew(nf), d(nf), xnew(nf);

  project(x);
  double f = eval_f(x, &g);
  beta = opts.beta0_rel * std::max(dp.obj_scale, std::abs(f));

  for (int round = 0; round < opts.max_rounds; ++round) {
    if (round > 0) beta *= 30.0;
    smem.clear();
    ymem.clear();
    rho_mem.clear();
    f = eval_f(x, &g);
    double best_f = f;
    int stall = 0;
    for (int it = 0; it < opts.max_iters; ++it) {
      // Two-loop L-BFGS direction on -gradient.
      d = g;
      std::vector<double> alpha_mem(smem.size());
      for (size_t j = smem.size(); j-- > 0;) {
        double a = 0.0;
        for (int i = 0; i < nf; ++i) a += smem[j][i] * d[i];
        a *= rho_mem[j];
        alpha_mem[j] = a;
        for (int i = 0; i < nf; ++i) d[i] -= a * ymem[j][i];
      }
      if (!smem.empty()) {
        double yy = 0.0, sy = 0.0;
        for (int i = 0; i < nf; ++i) {
          yy += ymem.back()[i] * ymem.back()[i];
          sy += smem.back()[i] * ymem.back()[i];
        }
        const double h0 = sy / std::max(yy, 1e-300);
        for (int i = 0; i < nf; ++i) d[i] *= h0;
      }
      for (size_t j = 0; j < smem.size(); ++j) {
        double b = 0.0;
        for (int i = 0; i < nf; ++i) b += ymem[j][i] * d[i];
        b *= rho_mem[j];
        for (int i = 0; i < nf; ++i) d[i] += (alpha_mem[j] - b) * smem[j][i];
      }
      for (int i = 0; i < nf; ++i) d[i] = -d[i];
      // Do not push against active bounds.
      for (int i = 0; i < nf; ++i)
        if (x[i] <= lo[i] && d[i] < 0.0) d[i] = 0.0;
      double gd = 0.0;
      for (int i = 0; i < nf; ++i) gd += g[i] * d[i];
      if (!(gd < 0.0)) {  // fall back to projected steepest descent
        for (int i = 0; i < nf; ++i) d[i] = (x[i] <= lo[i] && g[i] > 0.0) ? 0.0 : -g[i];
        gd = 0.0;
        for (int i = 0; i < nf; ++i) gd += g[i] * d[i];
        if (!(gd < 0.0)) break;  // projected stationary
      }

      double dmax_abs = 0.0;
      for (int i = 0; i < nf; ++i) dmax_abs = std::max(dmax_abs, std::abs(d[i]));
      // Without curvature information the direction can be wildly out of
      // scale; never move more than one scaled unit on the first try.
      double step = smem.empty() ? std::min(1.0, 1.0 / std::max(dmax_abs, 1e-12)) : 1.0;
      bool accepted = false;
      double fn = f;
      for (int ls = 0; ls < 60; ++ls) {
        for (int i = 0; i < nf; ++i) xnew[i] = x[i] + step * d[i];
        project(xnew);
        double dirg = 0.0;
        for (int i = 0; i < nf; ++i) dirg += g[i] * (xnew[i] - x[i]);
        fn = eval_f(xnew, nullptr);
        if (std::isfinite(fn) && dirg < 0.0 && fn <= f + 1e-4 * dirg) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        if (std::getenv("WPMEC_FAST_DEBUG"))
          std::fprintf(stderr, "fast: round %d it %d ls-fail f %.6e gd %.3e\n", round, it, f, gd);
        break;
      }
      eval_f(xnew, &gnew);
      std::vector<double> sv(nf), yv(nf);
      double sy = 0.0, ss = 0.0, yy = 0.0;
      for (int i = 0; i < nf; ++i) {
        sv[i] = xnew[i] - x[i];
        yv[i] = gnew[i] - g[i];
        sy += sv[i] * yv[i];
        ss += sv[i] * sv[i];
        yy += yv[i] * yv[i];
      }
      if (sy > 1e-12 * std::sqrt(ss) * std::sqrt(yy)) {
        smem.push_back(std::move(sv));
        ymem.push_back(std::move(yv));
        rho_mem.push_back(1.0 / sy);
        if (static_cast<int>(smem.size()) > m_mem) {
          smem.erase(smem.begin());
          ymem.erase(ymem.begin());
          rho_mem.erase(rho_mem.begin());
        }
      }
      x = xnew;
      f = fn;
      g = gnew;
      if (std::getenv("WPMEC_FAST_DEBUG") && it % 10 == 0)
        std::fprintf(stderr, "fast: round %d it %d f %.9e step %.2e\n", round, it, f, step);
      if (f < best_f - opts.tol_rel * (1.0 + std::abs(best_f))) {
        best_f = f;
        stall = 0;
      } else if (++stall >= 25) {
        if (std::getenv("WPMEC_FAST_DEBUG"))
          std::fprintf(stderr, "fast: round %d it %d stall exit f %.6e\n", round, it, f);
        break;
      }
    }
  }

  // Feasibilize: uniform shrink onto the PSD spectrahedra, then re-evaluate
  // the exact dual function (valid lower bound).
  tails_from(x);
  double smax = 1.0;
  for (int t = 0; t < T; ++t) {
    double bound = 0.0;
    for (int k = 0; k < K; ++k)
      bound += Lambda[static_cast<size_t>(k) * T + t] * dp.eta[k] *
               dp.h2[static_cast<size_t>(k) * T + t];
    if (bound <= 1.0) continue;
    CMat hm = CMat::zero(dp.Nt);
    for (int k = 0; k < K; ++k)
      hm.add_rank1(dp.h(k, t), Lambda[static_cast<size_t>(k) * T + t] * dp.eta[k]);
    smax = std::max(smax, max_eig(hm));
  }
  if (smax > 1.0) {
    const double shrink = (1.0 - 1e-12) / smax;
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < T; ++t) {
        double& xi = x[static_cast<size_t>(k) * T + t];
        xi = std::max(xi * shrink, lo[static_cast<size_t>(k) * T + t]);
      }
  }
  tails_from(x);
  for (int k = 0; k < K; ++k)
    pav_mu_tails(dp, k, Lambda.data() + static_cast<size_t>(k) * T, Nu,
                 Mu.data() + static_cast<size_t>(k) * T);

  DualSolveResult res;
  res.dual_value = dp.eval_tails(Lambda, Mu, Nu, &res.candidates);
  res.converged = true;
  res.iterations = evals;
  res.dv = DualVariables::zero(K, T);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) {
      const size_t row = static_cast<size_t>(k) * T;
      const double l_here = Lambda[row + t];
      const double l_next = (t + 1 < T) ? Lambda[row + t + 1] : 0.0;
      res.dv.l(k, t) = std::max(0.0, l_here - l_next);
      const double m_here = std::clamp(Mu[row + t], -1e250, 1e250);
      const double m_next = (t + 1 < T) ? std::clamp(Mu[row + t + 1], -1e250, 1e250) : 0.0;
      res.dv.m(k, t) = (t + 1 < T) ? std::max(0.0, m_here - m_next) : m_here;
    }
  if (dp.enable_off)
    for (int t = 0; t < T; ++t) {
      const double v_here = Nu[t];
      const double v_next = (t + 1 < T) ? Nu[t + 1] : 0.0;
      res.dv.nu[t] = (t + 1 < T) ? std::max(0.0, v_here - v_next) : v_here;
    }
  return res;
}

// --- offline-shape wrappers ---

std::pair<double, BitCandidates> dual_function(const DualVariables& dv, const Scenario& scen,
                                               const SystemParams& p) {
  DualProblem dp = DualProblem::offline(scen, p);
  dp.finalize();
  BitCandidates cand;
  const double v = dp.eval(dv, &cand);
  return {v, cand};
}

std::vector<double> dual_subgradient(const DualVariables& dv, const BitCandidates& cand,
                                     const Scenario& scen, const SystemParams& p) {
  DualProblem dp = DualProblem::offline(scen, p);
  dp.finalize();
  return dp.subgradient(dv, cand);
}

std::optional<FeasibilityCut> feasibility_cut(const DualVariables& dv, const Scenario& scen,
                                              const SystemParams& p, double eps_lambda) {
  DualProblem dp = DualProblem::offline(scen, p);
  dp.finalize();
  if (eps_lambda > 0.0) dp.eps_lambda = eps_lambda;
  return feasibility_cut_packed(dp, dp.pack(dv));
}

DualSolveResult ellipsoid_maximize(const Scenario& scen, const SystemParams& p,
                                   const EllipsoidOptions& opts) {
  DualProblem dp = DualProblem::offline(scen, p);
  dp.finalize(opts.eps_lambda_rel);
  return ellipsoid_maximize(dp, opts);
}

}  // namespace wpmec
