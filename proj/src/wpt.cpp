// SPDX-License-Identifier: Apache-2.0

#include "wpmec/wpt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace wpmec {

CMat WptSolution::covariance(int i, int Nt) const {
  CMat s(Nt, Nt);
  std::copy(covariances.data() + static_cast<size_t>(i) * Nt * Nt,
            covariances.data() + static_cast<size_t>(i + 1) * Nt * Nt, s.data());
  return s;
}

std::vector<double> WptSolution::slot_powers(int Nt) const {
  const int T = static_cast<int>(covariances.size()) / (Nt * Nt);
  std::vector<double> p(T, 0.0);
  for (int i = 0; i < T; ++i) p[i] = covariance(i, Nt).trace_real();
  return p;
}

CMat mrc_covariance(std::span<const cxd> h, double power) {
  if (power < 0.0) throw std::domain_error("mrc_covariance: negative power");
  const double n2 = norm2(h);
  if (!(n2 > 0.0)) throw std::domain_error("mrc_covariance: zero channel");
  CMat s(static_cast<int>(h.size()), static_cast<int>(h.size()));
  if (power > 0.0) s.add_rank1(h, power / n2);
  return s;
}

namespace {

struct BarrierState {
  // Scaled dual variables zhat[k*T+j]; natural z = sigma_k * zhat.
  std::vector<double> zhat;
};

struct WptWork {
  int K, T, Nt, n;
  double tau;
  std::vector<double> sigma;   // per-user variable scale
  std::vector<cxd> b;          // scaled rank-1 factors sqrt(sigma_k*eta_k)*h, K*T*Nt
  std::vector<double> chat;    // scaled objective coefficients, K*T
  double cscale = 1.0;         // natural objective = cscale * chat . zhat

  std::span<const cxd> bvec(int k, int j) const {
    return {b.data() + (static_cast<size_t>(k) * T + j) * Nt, static_cast<size_t>(Nt)};
  }
  int idx(int k, int j) const { return k * T + j; }
};

// Builds A_j(zhat) = I - sum_k zhat[k,j] b b^H.
CMat slot_matrix(const WptWork& w, const std::vector<double>& zhat, int j) {
  CMat a = CMat::identity(w.Nt);
  for (int k = 0; k < w.K; ++k) a.add_rank1(w.bvec(k, j), -zhat[w.idx(k, j)]);
  return a;
}

bool chain_ok(const WptWork& w, const std::vector<double>& zhat) {
  for (int k = 0; k < w.K; ++k) {
    for (int j = 0; j + 1 < w.T; ++j)
      if (!(zhat[w.idx(k, j)] - zhat[w.idx(k, j + 1)] > 0.0)) return false;
    if (!(zhat[w.idx(k, w.T - 1)] > 0.0)) return false;
  }
  return true;
}

// Barrier value; returns false when outside the domain.
bool barrier_value(const WptWork& w, const std::vector<double>& zhat, double t, double* val) {
  if (!chain_ok(w, zhat)) return false;
  double v = 0.0;
  for (int i = 0; i < w.n; ++i) v += t * w.chat[i] * zhat[i];
  for (int k = 0; k < w.K; ++k) {
    for (int j = 0; j + 1 < w.T; ++j) v += std::log(zhat[w.idx(k, j)] - zhat[w.idx(k, j + 1)]);
    v += std::log(zhat[w.idx(k, w.T - 1)]);
  }
  for (int j = 0; j < w.T; ++j) {
    CMat a = slot_matrix(w, zhat, j);
    if (!cholesky(a, 1e-300)) return false;
    for (int d = 0; d < w.Nt; ++d) v += 2.0 * std::log(a(d, d).real());
  }
  *val = v;
  return true;
}

}  // namespace

WptSolution min_power_wpt(const EnergyDemandProfile& demands, const WptChannels& ch,
                          std::span<const double> eta, double tau, double tol_rel) {
  const int K = ch.K, T = ch.T, Nt = ch.Nt;
  if (demands.K != K || demands.T != T)
    throw std::invalid_argument("min_power_wpt: demand/channel dimension mismatch");

  WptSolution sol;
  sol.covariances.assign(static_cast<size_t>(T) * Nt * Nt, cxd(0.0));
  sol.dual_certificate.assign(static_cast<size_t>(K) * T, 0.0);

  // Monotone, clamped demands and their increments.
  std::vector<double> D(static_cast<size_t>(K) * T, 0.0);
  double dmax = 0.0;
  for (int k = 0; k < K; ++k) {
    double run = 0.0;
    for (int i = 0; i < T; ++i) {
      run = std::max(run, std::max(0.0, demands.at(k, i)));
      D[static_cast<size_t>(k) * T + i] = run;
      dmax = std::max(dmax, run);
    }
  }
  if (dmax <= 0.0) {  // nothing to deliver
    sol.converged = true;
    return sol;
  }

  WptWork w;
  w.K = K;
  w.T = T;
  w.Nt = Nt;
  w.n = K * T;
  w.tau = tau;
  w.sigma.resize(K);
  w.b.resize(static_cast<size_t>(K) * T * Nt);
  for (int k = 0; k < K; ++k) {
    double gmax = 0.0;
    for (int j = 0; j < T; ++j) gmax = std::max(gmax, norm2(ch.h(k, j)));
    if (!(gmax > 0.0)) throw std::invalid_argument("min_power_wpt: zero channel");
    w.sigma[k] = 1.0 / (eta[k] * gmax);
    for (int j = 0; j < T; ++j) {
      const double f = std::sqrt(w.sigma[k] * eta[k]);
      auto hv = ch.h(k, j);
      for (int a = 0; a < Nt; ++a) w.b[(static_cast<size_t>(k) * T + j) * Nt + a] = f * hv[a];
    }
  }
  // chat[k,j] = sigma_k * (D[k,j]-D[k,j-1]) / dmax
  w.chat.assign(w.n, 0.0);
  w.cscale = dmax;
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < T; ++j) {
      const double prev = (j == 0) ? 0.0 : D[static_cast<size_t>(k) * T + j - 1];
      w.chat[w.idx(k, j)] = w.sigma[k] * (D[static_cast<size_t>(k) * T + j] - prev) / dmax;
    }

  // Strictly interior start: per-user decreasing ramp inside the spectrahedra.
  std::vector<double> zhat(w.n);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < T; ++j) zhat[w.idx(k, j)] = 0.25 * (T - j) / (static_cast<double>(T) * K);

  const int m_total = T * Nt + K * T;
  double t = 1.0;
  int newton_total = 0;
  const int max_newton = 4000;

  std::vector<double> grad(w.n), dir(w.n);
  std::vector<cxd> vsol(static_cast<size_t>(K) * Nt);

  // Hessian (negated, SPD) stored as a real dense matrix.
  std::vector<double> hess(static_cast<size_t>(w.n) * w.n);

  auto center = [&](double tcur) {
    for (int it = 0; it < 200; ++it) {
      if (newton_total >= max_newton) return false;
      ++newton_total;
      std::fill(grad.begin(), grad.end(), 0.0);
      std::fill(hess.begin(), hess.end(), 0.0);
      for (int i = 0; i < w.n; ++i) grad[i] = tcur * w.chat[i];

      for (int j = 0; j < T; ++j) {
        CMat a = slot_matrix(w, zhat, j);
        CMat l = a;
        if (!cholesky(l, 1e-300)) return false;
        // v_k = A^{-1} b_k
        for (int k = 0; k < K; ++k) {
          auto bv = w.bvec(k, j);
          std::copy(bv.begin(), bv.end(), vsol.begin() + static_cast<size_t>(k) * Nt);
          cholesky_solve(l, {vsol.data() + static_cast<size_t>(k) * Nt,
                             static_cast<size_t>(Nt)});
        }
        for (int k = 0; k < K; ++k) {
          auto bk = w.bvec(k, j);
          for (int k2 = 0; k2 <= k; ++k2) {
            const cxd m = dot_conj(bk, {vsol.data() + static_cast<size_t>(k2) * Nt,
                                        static_cast<size_t>(Nt)});
            const double hv = std::norm(m);
            hess[static_cast<size_t>(w.idx(k, j)) * w.n + w.idx(k2, j)] += hv;
            if (k2 != k) hess[static_cast<size_t>(w.idx(k2, j)) * w.n + w.idx(k, j)] += hv;
            if (k2 == k) grad[w.idx(k, j)] -= m.real();
          }
        }
      }
      for (int k = 0; k < K; ++k) {
        for (int j = 0; j < T; ++j) {
          const double s = (j + 1 < T) ? zhat[w.idx(k, j)] - zhat[w.idx(k, j + 1)]
                                       : zhat[w.idx(k, j)];
          const double inv = 1.0 / s;
          grad[w.idx(k, j)] += inv;
          if (j + 1 < T) grad[w.idx(k, j + 1)] -= inv;
          const double inv2 = inv * inv;
          hess[static_cast<size_t>(w.idx(k, j)) * w.n + w.idx(k, j)] += inv2;
          if (j + 1 < T) {
            hess[static_cast<size_t>(w.idx(k, j + 1)) * w.n + w.idx(k, j + 1)] += inv2;
            hess[static_cast<size_t>(w.idx(k, j)) * w.n + w.idx(k, j + 1)] -= inv2;
            hess[static_cast<size_t>(w.idx(k, j + 1)) * w.n + w.idx(k, j)] -= inv2;
          }
        }
      }

      // Solve (-H) d = g; the negated Hessian is SPD but can be extremely
      // ill conditioned near the boundary, so escalate a diagonal ridge
      // until the dense Cholesky goes through.
      {
        const int n = w.n;
        double diag_max = 0.0;
        for (int c = 0; c < n; ++c)
          diag_max = std::max(diag_max, hess[static_cast<size_t>(c) * n + c]);
        std::vector<double> fac;
        bool factored = false;
        for (double ridge : {0.0, 1e-14, 1e-10, 1e-6, 1e-2}) {
          fac = hess;
          for (int c = 0; c < n; ++c)
            fac[static_cast<size_t>(c) * n + c] += ridge * diag_max;
          factored = true;
          for (int c = 0; c < n && factored; ++c) {
            double d = fac[static_cast<size_t>(c) * n + c];
            for (int k2 = 0; k2 < c; ++k2) {
              const double v = fac[static_cast<size_t>(c) * n + k2];
              d -= v * v;
            }
            if (!(d > 1e-300)) {
              factored = false;
              break;
            }
            const double ljj = std::sqrt(d);
            fac[static_cast<size_t>(c) * n + c] = ljj;
            for (int r = c + 1; r < n; ++r) {
              double s = fac[static_cast<size_t>(r) * n + c];
              for (int k2 = 0; k2 < c; ++k2)
                s -= fac[static_cast<size_t>(r) * n + k2] * fac[static_cast<size_t>(c) * n + k2];
              fac[static_cast<size_t>(r) * n + c] = s / ljj;
            }
          }
          if (factored) break;
        }
        if (!factored) return false;
        dir = grad;
        for (int r = 0; r < n; ++r) {
          double s = dir[r];
          for (int k2 = 0; k2 < r; ++k2) s -= fac[static_cast<size_t>(r) * n + k2] * dir[k2];
          dir[r] = s / fac[static_cast<size_t>(r) * n + r];
        }
        for (int r = n - 1; r >= 0; --r) {
          double s = dir[r];
          for (int k2 = r + 1; k2 < n; ++k2)
            s -= fac[static_cast<size_t>(k2) * n + r] * dir[k2];
          dir[r] = s / fac[static_cast<size_t>(r) * n + r];
        }
      }

      double dec2 = 0.0;
      for (int i = 0; i < w.n; ++i) dec2 += grad[i] * dir[i];
      if (!(dec2 > 0.0)) {
        if (std::getenv("WPMEC_WPT_DEBUG")) std::fprintf(stderr, "wpt: center exit dec2<=0 it %d\n", it);
        return true;  // numerically stationary
      }
      if (std::sqrt(dec2) <= 1e-8) {
        if (std::getenv("WPMEC_WPT_DEBUG")) std::fprintf(stderr, "wpt: center exit dec %0.2e it %d\n", std::sqrt(dec2), it);
        return true;
      }

      double f0;
      if (!barrier_value(w, zhat, tcur, &f0)) return false;
      std::vector<double> trial(w.n);
      // Damped Newton: unit steps only inside the quadratic-convergence
      // region, 1/(1+lambda) otherwise (self-concordant safeguard).
      const double damp = 1.0 / (1.0 + std::sqrt(dec2));
      auto try_direction = [&](const std::vector<double>& dd, double slope) {
        double alpha = std::max(damp, 1e-3);
        // fraction-to-boundary guard for chain slacks
        for (int k = 0; k < K; ++k)
          for (int j = 0; j < T; ++j) {
            const double s = (j + 1 < T) ? zhat[w.idx(k, j)] - zhat[w.idx(k, j + 1)]
                                         : zhat[w.idx(k, j)];
            const double ds = (j + 1 < T) ? dd[w.idx(k, j)] - dd[w.idx(k, j + 1)]
                                          : dd[w.idx(k, j)];
            if (ds < 0.0) alpha = std::min(alpha, -0.99 * s / ds);
          }
        for (int ls = 0; ls < 60; ++ls) {
          for (int i = 0; i < w.n; ++i) trial[i] = zhat[i] + alpha * dd[i];
          double f1;
          if (barrier_value(w, trial, tcur, &f1) && f1 >= f0 + 1e-4 * alpha * slope) {
            zhat = trial;
            return true;
          }
          alpha *= 0.5;
        }
        return false;
      };
      bool accepted = try_direction(dir, dec2);
      if (!accepted) {
        // Ill-conditioned Newton direction; fall back to a diagonally
        // preconditioned gradient step.
        std::vector<double> dd(w.n);
        double slope = 0.0;
        for (int i = 0; i < w.n; ++i) {
          const double hd = std::max(hess[static_cast<size_t>(i) * w.n + i], 1e-300);
          dd[i] = grad[i] / hd;
          slope += grad[i] * dd[i];
        }
        accepted = try_direction(dd, slope);
      }
      if (!accepted) {
        if (std::getenv("WPMEC_WPT_DEBUG"))
          std::fprintf(stderr, "wpt: center exit ls-fail it %d dec %.2e\n", it, std::sqrt(dec2));
        return true;  // cannot improve further at this t
      }
    }
    return true;
  };

  // Path following until the barrier gap certificate meets the tolerance.
  // A centering failure (boundary conditioning) restores the last
  // well-centered point; the recovery then works from there.
  const bool dbg = std::getenv("WPMEC_WPT_DEBUG") != nullptr;
  std::vector<double> zhat_good = zhat;
  double t_good = t;
  for (int round = 0; round < 60; ++round) {
    const bool ok = center(t);
    double dualval = 0.0;
    for (int i = 0; i < w.n; ++i) dualval += w.chat[i] * zhat[i];
    dualval *= w.cscale;
    if (dbg)
      std::fprintf(stderr, "wpt: round %d t %.3e center_ok %d dual %.9e bar_gap %.3e\n", round,
                   t, ok ? 1 : 0, dualval, m_total / t);
    if (!ok) {
      zhat = zhat_good;
      t = t_good;
      break;
    }
    zhat_good = zhat;
    t_good = t;
    const double primal_estimate = dualval + m_total / t;
    if (m_total / t <= 0.25 * tol_rel * (1.0 + primal_estimate)) break;
    t *= 10.0;
  }

  // --- primal recovery straight off the central path ---
  //
  // S_j = A_j(z)^{-1} / (t*tau) is primal feasible up to the Newton residual
  // and its objective sits within m_total/t of the dual value.  Cleanup:
  // slots with negligible trace are zeroed exactly and any residual
  // cumulative deficit is covered by a uniform scale-up.
  auto recover = [&]() {
    const bool dbg2 = std::getenv("WPMEC_WPT_DEBUG") != nullptr;
    std::vector<double> slot_trace(T, 0.0);
    std::vector<CMat> smat(T, CMat(Nt, Nt));
    for (int j = 0; j < T; ++j) {
      CMat l = slot_matrix(w, zhat, j);
      if (!cholesky(l, 1e-300)) {
        if (dbg2) std::fprintf(stderr, "wpt: recover cholesky failed at slot %d\n", j);
        continue;
      }
      CMat a = slot_matrix(w, zhat, j);
      CMat inv(Nt, Nt);
      std::vector<cxd> col(Nt), resid(Nt);
      for (int c = 0; c < Nt; ++c) {
        std::fill(col.begin(), col.end(), cxd(0.0));
        col[c] = 1.0;
        cholesky_solve(l, col);
        // One step of iterative refinement; the certificates are nearly
        // singular here and a plain solve loses several digits.
        matvec(a, col, resid);
        for (int r = 0; r < Nt; ++r) resid[r] = (r == c ? cxd(1.0) : cxd(0.0)) - resid[r];
        cholesky_solve(l, resid);
        for (int r = 0; r < Nt; ++r) inv(r, c) = col[r] + resid[r];
      }
      inv.symmetrize_hermitian();
      // The barrier works on demands normalized by dmax, so the implied
      // primal scales back by the same factor.
      inv *= dmax / (t * tau);
      smat[j] = inv;
      slot_trace[j] = inv.trace_real();
    }
    // Zero negligible slots, smallest first, spending at most half of the
    // gap budget: each zeroed watt costs at most one bump watt later.
    double total_trace = 0.0;
    for (int j = 0; j < T; ++j) total_trace += slot_trace[j];
    std::vector<int> order(T);
    for (int j = 0; j < T; ++j) order[j] = j;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return slot_trace[a] < slot_trace[b]; });
    double budget = 0.5 * tol_rel * total_trace;
    for (int j : order) {
      if (slot_trace[j] <= 0.0) continue;
      if (slot_trace[j] > budget) break;
      budget -= slot_trace[j];
      smat[j] = CMat(Nt, Nt);
      slot_trace[j] = 0.0;
    }

    // Residual cumulative shortfalls (Newton residual, zeroed slots) are
    // covered exactly by small MRC bumps at the best channel seen so far.
    for (int k = 0; k < K; ++k) {
      int jbest = 0;
      double gbest = eta[k] * norm2(ch.h(k, 0));
      double cum = 0.0;
      std::vector<double> delivered(T);
      for (int i = 0; i < T; ++i) delivered[i] = tau * eta[k] * quad_form(smat[i], ch.h(k, i));
      for (int i = 0; i < T; ++i) {
        const double g = eta[k] * norm2(ch.h(k, i));
        if (g > gbest) {
          gbest = g;
          jbest = i;
        }
        cum += delivered[i];
        const double need = D[static_cast<size_t>(k) * T + i] * (1.0 + 1e-14) - cum;
        if (need > 0.0) {
          if (dbg2)
            std::fprintf(stderr, "wpt: bump user %d prefix %d need %.3e cum %.3e D %.3e\n", k,
                         i, need, cum, D[static_cast<size_t>(k) * T + i]);
          // Other users harvest from the bump too; ignoring that is safe.
          smat[jbest] += mrc_covariance(ch.h(k, jbest), need / (tau * gbest));
          cum += need;
        }
      }
    }
    double primal = 0.0;
    for (int j = 0; j < T; ++j) {
      std::copy(smat[j].data(), smat[j].data() + static_cast<size_t>(Nt) * Nt,
                sol.covariances.data() + static_cast<size_t>(j) * Nt * Nt);
      primal += tau * smat[j].trace_real();
    }
    return primal;
  };

  auto dual_value_natural = [&]() {
    double dv = 0.0;
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < T; ++i) {
        const double znat = w.sigma[k] * zhat[w.idx(k, i)];
        const double znext = (i + 1 < T) ? w.sigma[k] * zhat[w.idx(k, i + 1)] : 0.0;
        sol.dual_certificate[static_cast<size_t>(k) * T + i] = std::max(0.0, znat - znext);
        dv += sol.dual_certificate[static_cast<size_t>(k) * T + i] *
              D[static_cast<size_t>(k) * T + i];
      }
    return dv;
  };

  std::vector<cxd> best_cov;
  std::vector<double> best_cert;
  double best_gap = std::numeric_limits<double>::infinity();
  double best_primal = 0.0, best_dual = 0.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    sol.dual_value = dual_value_natural();
    sol.total_energy = recover();
    sol.gap = sol.total_energy - sol.dual_value;
    if (dbg)
      std::fprintf(stderr, "wpt: attempt %d t %.3e primal %.9e dual %.9e relgap %.3e\n",
                   attempt, t, sol.total_energy, sol.dual_value,
                   sol.gap / (1.0 + sol.total_energy));
    if (sol.gap < best_gap) {
      best_gap = sol.gap;
      best_primal = sol.total_energy;
      best_dual = sol.dual_value;
      best_cov = sol.covariances;
      best_cert = sol.dual_certificate;
    }
    if (best_gap <= tol_rel * (1.0 + best_primal) || newton_total >= max_newton) break;
    // Rounding lost too much: tighten the central path and try again.  Very
    // large path parameters stop helping once conditioning degrades, so quit
    // as soon as an attempt fails to improve.
    if (attempt > 0 && sol.gap >= 0.9 * best_gap && sol.gap != best_gap) break;
    t *= 10.0;
    if (!center(t)) {
      zhat = zhat_good;
      t = t_good;
      break;
    }
    zhat_good = zhat;
    t_good = t;
  }
  sol.covariances = std::move(best_cov);
  sol.dual_certificate = std::move(best_cert);
  sol.total_energy = best_primal;
  sol.dual_value = best_dual;
  sol.gap = best_gap;
  sol.converged = best_gap <= tol_rel * (1.0 + best_primal);
  sol.newton_iterations = newton_total;
  return sol;
}

}  // namespace wpmec
