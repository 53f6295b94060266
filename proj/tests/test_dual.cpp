// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "wpmec/dual.hpp"
#include "wpmec/rng.hpp"
#include "wpmec/scenario.hpp"
#include "wpmec/wpt.hpp"

using namespace wpmec;

namespace {

SystemParams params(int K, int N, int Nt = 4) {
  return SystemParams::uniform(K, N, Nt, 0.02, 2e6, 1e-9, 0.3, 1e-28, 1e-29, 1e3, 1e3);
}

Scenario scenario(uint64_t seed, int K, int N, int Nt = 4, double d = 3.0) {
  SystemParams p = params(K, N, Nt);
  ChannelGeometry geom = ChannelGeometry::uniform(K, d, 3.0, -32.0, 3.0);
  return make_scenario(seed, geom, 5e5, 1e6, p);
}

// A dual point that is strictly feasible: small lambda everywhere plus
// random mu/nu respecting the sign pattern.
DualVariables random_feasible_dual(const DualProblem& dp, uint64_t seed, double mu_mag) {
  Substream rs(seed);
  DualVariables dv = DualVariables::zero(dp.K, dp.T);
  for (int k = 0; k < dp.K; ++k) {
    double h2max = 0.0;
    for (int t = 0; t < dp.T; ++t)
      h2max = std::max(h2max, dp.h2[static_cast<size_t>(k) * dp.T + t]);
    for (int t = 0; t < dp.T; ++t)
      dv.l(k, t) = rs.uniform(0.1, 0.9) / (dp.T * dp.K * dp.eta[k] * h2max);
    for (int t = 0; t < dp.T - 1; ++t) dv.m(k, t) = rs.uniform(0.0, mu_mag);
    dv.m(k, dp.T - 1) = rs.uniform(-mu_mag, mu_mag);
  }
  for (int t = 0; t < dp.T - 1; ++t) dv.nu[t] = rs.uniform(0.0, mu_mag);
  dv.nu[dp.T - 1] = rs.uniform(-mu_mag, mu_mag);
  return dv;
}

}  // namespace

TEST_SUITE("dual") {

TEST_CASE("mec subproblem closed form and KKT stationarity") {
  // tau=1, zeta0=1/3, C0=1, tail=-3 -> sqrt(3)
  std::vector<double> tails = {0.0, -3.0, 1.0};
  std::vector<double> l = solve_mec_subproblem(tails, 1.0 / 3.0, 1.0, 1.0);
  CHECK(l[0] == 0.0);  // first slot pinned
  CHECK(l[1] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(l[2] == 0.0);  // positive tail gates to zero

  Substream rs(5);
  for (int i = 0; i < 20; ++i) {
    const double a = rs.uniform(1e-22, 1e-18);
    const double v = rs.uniform(-1e-3, 1e-3);
    const double lb = solve_mec_subproblem_scalar(v, a);
    if (lb > 0.0) {
      // stationarity: 3 a l^2 = -v
      CHECK(3.0 * a * lb * lb == doctest::Approx(-v).epsilon(1e-9));
    } else {
      CHECK(v >= 0.0);  // one-sided derivative at zero is nonnegative
    }
  }
}

TEST_CASE("local subproblem closed form") {
  CHECK(solve_loc_subproblem(3.0, -3.0, 1.0 / 3.0, 1.0, 1.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(solve_loc_subproblem(5.0, 2.0, 1e-28, 1e3, 0.02) == 0.0);
  // scaling both tails by c > 0 leaves the output unchanged
  Substream rs(7);
  for (int i = 0; i < 10; ++i) {
    const double lam = rs.uniform(0.1, 10.0), mu = -rs.uniform(0.1, 10.0);
    const double c = rs.uniform(0.1, 50.0);
    CHECK(solve_loc_subproblem(c * lam, c * mu, 1e-28, 1e3, 0.02) ==
          doctest::Approx(solve_loc_subproblem(lam, mu, 1e-28, 1e3, 0.02)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(solve_loc_subproblem(0.0, -1.0, 1e-28, 1e3, 0.02), std::invalid_argument);
}

TEST_CASE("offload subproblem closed form") {
  // threshold sigma^2 ln2/(B g2) = 1 with sigma^2 = 1/ln2, B = 1, g2 = 1;
  // drive/lambda = 4 and tau*B = 1 give exactly 2 bits.
  const double sigma2 = 1.0 / std::log(2.0);
  CHECK(solve_off_subproblem(1.0, -2.0, 2.0, 1.0, sigma2, 1.0, 1.0) ==
        doctest::Approx(2.0).epsilon(1e-12));
  // nu tail below mu tail gates to zero
  CHECK(solve_off_subproblem(1.0, 0.5, 0.2, 1.0, sigma2, 1.0, 1.0) == 0.0);
  // strictly increasing in the channel gain once positive
  double prev = 0.0;
  for (double g2 : {1.0, 2.0, 4.0, 8.0}) {
    const double l = solve_off_subproblem(1.0, -2.0, 2.0, g2, sigma2, 1.0, 1.0);
    CHECK(l > prev);
    prev = l;
  }
  // KKT stationarity at interior solutions
  Substream rs(11);
  for (int i = 0; i < 20; ++i) {
    const double lam = rs.uniform(0.5, 5.0);
    const double mu = -rs.uniform(0.0, 1e-4);
    const double nu = rs.uniform(0.0, 1e-4);
    const double g2 = rs.uniform(1e-6, 1e-3);
    const double l = solve_off_subproblem(lam, mu, nu, g2, 1e-9, 2e6, 0.02);
    if (l > 0.0) {
      const double marginal = 1e-9 * std::log(2.0) * exp2_clamped(l / (0.02 * 2e6)) /
                              (2e6 * g2);
      CHECK(lam * marginal == doctest::Approx(nu - mu).epsilon(1e-9));
    }
  }
}

TEST_CASE("dual function at the near-zero multiplier point") {
  Scenario scen = scenario(3, 2, 4);
  SystemParams p = params(2, 4);
  DualProblem dp = DualProblem::offline(scen, p);
  dp.finalize();
  DualVariables dv = DualVariables::zero(2, 4);
  for (int k = 0; k < 2; ++k) dv.l(k, 3) = dp.eps_lambda;
  auto [value, cand] = dual_function(dv, scen, p);
  CHECK(value == 0.0);
  for (double v : cand.loc) CHECK(v == 0.0);
  for (double v : cand.off) CHECK(v == 0.0);
  for (double v : cand.mec) CHECK(v == 0.0);
}

TEST_CASE("weak duality against feasible local-computing allocations") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const int K = 2, N = 4;
    Scenario scen = scenario(seed, K, N);
    SystemParams p = params(K, N);
    DualProblem dp = DualProblem::offline(scen, p);
    dp.finalize();

    // Feasible primal: execute arrivals locally, harvest per slot via MRC.
    Allocation alloc = Allocation::zero(K, N, 4);
    for (int i = 0; i < N; ++i) {
      CMat s(4, 4);
      for (int k = 0; k < K; ++k) {
        alloc.local(k, i) = scen.arrival(k, i);
        const double need = local_energy(alloc.local(k, i), p.user_capacitance[k],
                                         p.user_cycles_per_bit[k], p.slot_duration);
        const double power =
            need / (p.slot_duration * p.harvest_efficiency[k] * scen.h_gain(k, i));
        CMat beam = mrc_covariance(scen.h(k, i), 1.0000001 * power);
        s += beam;
      }
      alloc.set_covariance(i, s);
    }
    const double primal = total_objective(alloc, p);
    REQUIRE(check_feasibility(alloc, scen, p, FeasibilityTolerances::scaled(scen, p)).feasible);

    for (uint64_t ds = 1; ds <= 10; ++ds) {
      DualVariables dv = random_feasible_dual(dp, seed * 100 + ds, 1e-5);
      REQUIRE_FALSE(feasibility_cut(dv, scen, p, dp.eps_lambda).has_value());
      auto [value, cand] = dual_function(dv, scen, p);
      CHECK(value <= primal * (1.0 + 1e-9) + 1e-9);
    }
  }
}

TEST_CASE("dual function is concave along random feasible segments") {
  Scenario scen = scenario(9, 2, 5);
  SystemParams p = params(2, 5);
  DualProblem dp = DualProblem::offline(scen, p);
  dp.finalize();
  for (uint64_t s = 1; s <= 10; ++s) {
    DualVariables a = random_feasible_dual(dp, 1000 + s, 1e-5);
    DualVariables b = random_feasible_dual(dp, 2000 + s, 1e-5);
    DualVariables mid = a;
    for (size_t i = 0; i < a.lambda.size(); ++i)
      mid.lambda[i] = 0.5 * (a.lambda[i] + b.lambda[i]);
    for (size_t i = 0; i < a.mu.size(); ++i) mid.mu[i] = 0.5 * (a.mu[i] + b.mu[i]);
    for (size_t i = 0; i < a.nu.size(); ++i) mid.nu[i] = 0.5 * (a.nu[i] + b.nu[i]);
    const double va = dual_function(a, scen, p).first;
    const double vb = dual_function(b, scen, p).first;
    const double vm = dual_function(mid, scen, p).first;
    CHECK(vm >= 0.5 * (va + vb) - 1e-9 * (1.0 + std::abs(va) + std::abs(vb)));
  }
}

TEST_CASE("subgradient is a valid supergradient (finite differences)") {
  Scenario scen = scenario(13, 2, 4);
  SystemParams p = params(2, 4);
  DualProblem dp = DualProblem::offline(scen, p);
  dp.finalize();
  DualVariables dv = random_feasible_dual(dp, 77, 1e-5);
  auto [v0, cand] = dual_function(dv, scen, p);
  std::vector<double> g = dual_subgradient(dv, cand, scen, p);
  const size_t mu0 = static_cast<size_t>(dp.K) * dp.T;

  Substream rs(31);
  for (int trial = 0; trial < 30; ++trial) {
    // G(dv + t e_j) <= G(dv) + t g_j for supergradients of a concave G.
    const size_t j = rs.next_u64() % g.size();
    double step = (j < mu0 ? dp.s_lambda[j / dp.T] : (j < 2 * mu0 ? dp.s_mu : dp.s_nu)) * 1e-6;
    DualVariables pert = dv;
    if (j < mu0)
      pert.lambda[j] += step;
    else if (j < 2 * mu0)
      pert.mu[j - mu0] += step;
    else
      pert.nu[j - 2 * mu0] += step;
    const double v1 = dual_function(pert, scen, p).first;
    CHECK(v1 <= v0 + step * g[j] + 1e-7 * (1.0 + std::abs(v0)));
  }
}

TEST_CASE("feasibility cuts fire in the documented order and separate") {
  Scenario scen = scenario(21, 2, 3);
  SystemParams p = params(2, 3);
  DualProblem dp = DualProblem::offline(scen, p);
  dp.finalize();

  // near-zero multipliers on the last slot only: no cut
  DualVariables ok = DualVariables::zero(2, 3);
  for (int k = 0; k < 2; ++k) ok.l(k, 2) = dp.eps_lambda;
  CHECK_FALSE(feasibility_cut(ok, scen, p, dp.eps_lambda).has_value());

  // explicit sign violation on mu
  DualVariables bad_mu = ok;
  bad_mu.m(1, 0) = -1.0;
  auto cut = feasibility_cut(bad_mu, scen, p, dp.eps_lambda);
  REQUIRE(cut.has_value());
  CHECK(cut->kind == CutKind::SignMu);
  CHECK(cut->user == 1);
  CHECK(cut->slot == 0);

  // lambda floor violation
  DualVariables bad_floor = ok;
  bad_floor.l(0, 2) = 0.0;
  auto cut2 = feasibility_cut(bad_floor, scen, p, dp.eps_lambda);
  REQUIRE(cut2.has_value());
  CHECK(cut2->kind == CutKind::LambdaFloor);

  // large lambda makes the first certificate indefinite: PSD cut separating
  DualVariables bad_psd = ok;
  for (int k = 0; k < 2; ++k)
    bad_psd.l(k, 0) = 10.0 / (p.harvest_efficiency[k] * scen.h_gain(k, 0));
  auto cut3 = feasibility_cut(bad_psd, scen, p, dp.eps_lambda);
  REQUIRE(cut3.has_value());
  CHECK(cut3->kind == CutKind::Psd);
  // the cut normal strictly separates the violating point from the feasible
  // near-zero point: g.(z_ok - z_bad) > 0
  const std::vector<double> xb = dp.pack(bad_psd);
  const std::vector<double> xo = dp.pack(ok);
  double dot = 0.0;
  for (size_t i = 0; i < xb.size(); ++i) dot += cut3->g[i] * (xo[i] - xb[i]);
  CHECK(dot > 0.0);
}

TEST_CASE("ellipsoid solves the single-slot single-user problem analytically") {
  const int K = 1, N = 1;
  Scenario scen = scenario(33, K, N);
  SystemParams p = params(K, N);
  const double A = scen.arrival(0, 0);
  const double analytic = local_energy(A, p.user_capacitance[0], p.user_cycles_per_bit[0],
                                       p.slot_duration) /
                          (p.harvest_efficiency[0] * scen.h_gain(0, 0));
  EllipsoidOptions opts;
  opts.target_accuracy_rel = 1e-6;
  DualSolveResult res = ellipsoid_maximize(scen, p, opts);
  CHECK(res.converged);
  CHECK(res.dual_value == doctest::Approx(analytic).epsilon(1e-3));
  // volume identity: incremental and direct log-determinants agree
  CHECK(res.lndet_shape == doctest::Approx(res.lndet_shape_direct).epsilon(1e-6));
}

TEST_CASE("ellipsoid on zero arrivals stays at zero") {
  SystemParams p = params(2, 3);
  ChannelGeometry geom = ChannelGeometry::uniform(2, 3.0, 3.0, -32.0, 3.0);
  Scenario scen = make_scenario(3, geom, 0.0, 0.0, p);
  EllipsoidOptions opts;
  opts.max_iterations = 4000;
  DualSolveResult res = ellipsoid_maximize(scen, p, opts);
  CHECK(std::abs(res.dual_value) <= 1e-9);
}

TEST_CASE("iteration count stays within the ellipsoid complexity ceiling") {
  const int K = 2, N = 3;
  Scenario scen = scenario(55, K, N);
  SystemParams p = params(K, N);
  EllipsoidOptions opts;
  opts.target_accuracy_rel = 1e-4;
  opts.log_every = 1;
  DualSolveResult res = ellipsoid_maximize(scen, p, opts);
  CHECK(res.converged);
  const int n = 2 * N * K + N;
  const double radius = 30.0 * std::sqrt(static_cast<double>(n));
  DualProblem dp = DualProblem::offline(scen, p);
  dp.finalize();
  const double eps = opts.target_accuracy_rel * dp.obj_scale;
  const double ceiling =
      2.0 * n * n * std::log(std::max(10.0, radius * res.lipschitz_estimate / eps));
  CHECK(static_cast<double>(res.iterations) <= ceiling);
  CHECK_FALSE(res.log.empty());
  // iteration log is exportable as CSV
  const std::string csv = iteration_log_csv(res.log);
  CHECK(csv.rfind("iter,dual_value,gap_bound,cut_type\n", 0) == 0);
}

TEST_CASE("fast engine agrees with the ellipsoid on small instances") {
  for (uint64_t seed = 1; seed <= 4; ++seed) {
    const int K = 2, N = 4;
    Scenario scen = scenario(seed + 60, K, N);
    SystemParams p = params(K, N);
    DualProblem dp = DualProblem::offline(scen, p);
    dp.finalize();
    EllipsoidOptions eo;
    eo.target_accuracy_rel = 1e-5;
    DualSolveResult ell = ellipsoid_maximize(dp, eo);
    FastDualOptions fo;
    DualSolveResult fast = fast_maximize(dp, fo);
    REQUIRE(ell.converged);
    // both are lower bounds on the same optimum; the fast engine must land
    // within a fraction of a percent of the certified ellipsoid value
    CHECK(fast.dual_value <=
          ell.dual_value + ell.gap_bound + 1e-6 * (1 + std::abs(ell.dual_value)));
    CHECK(fast.dual_value >= ell.dual_value * (1.0 - 5e-3) - 1e-9);
    // the fast engine's returned point is dual feasible
    CHECK_FALSE(feasibility_cut_packed(dp, dp.pack(fast.dv)).has_value());
  }
}

TEST_CASE("candidate bit sequences are monotone by construction") {
  Scenario scen = scenario(71, 2, 6);
  SystemParams p = params(2, 6);
  DualProblem dp = DualProblem::offline(scen, p);
  dp.finalize();
  for (uint64_t s = 0; s < 5; ++s) {
    DualVariables dv = random_feasible_dual(dp, 500 + s, 1e-4);
    BitCandidates cand;
    dp.eval(dv, &cand);
    for (int k = 0; k < 2; ++k)
      for (int t = 0; t + 1 < 6; ++t)
        CHECK(cand.loc[static_cast<size_t>(k) * 6 + t] <=
              cand.loc[static_cast<size_t>(k) * 6 + t + 1] + 1e-12);
    for (int t = 1; t + 1 < 6; ++t) CHECK(cand.mec[t] <= cand.mec[t + 1] + 1e-12);
  }
}

}  // TEST_SUITE
