// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "wpmec/model.hpp"
#include "wpmec/rng.hpp"
#include "wpmec/scenario.hpp"
#include "wpmec/wpt.hpp"

using namespace wpmec;

namespace {

SystemParams tiny_params(int K = 1, int N = 2, int Nt = 2) {
  return SystemParams::uniform(K, N, Nt, 0.02, 2e6, 1e-9, 0.3, 1e-28, 1e-29, 1e3, 1e3);
}

Scenario tiny_scenario(uint64_t seed, int K = 1, int N = 2, int Nt = 2, double lo = 5e5,
                       double hi = 1e6) {
  SystemParams p = tiny_params(K, N, Nt);
  ChannelGeometry geom = ChannelGeometry::uniform(K, 3.0, 3.0, -32.0, 3.0);
  return make_scenario(seed, geom, lo, hi, p);
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("local energy closed form") {
  CHECK(local_energy(0.0, 1e-28, 1e3, 0.02) == 0.0);
  // 1e-28 * (1e3)^3 * (1e5)^3 / (0.02)^2 = 0.25 J
  CHECK(local_energy(1e5, 1e-28, 1e3, 0.02) == doctest::Approx(0.25).epsilon(1e-12));
  // cubic homogeneity: doubling bits multiplies energy by 8
  Substream rs(3);
  for (int i = 0; i < 10; ++i) {
    const double l = rs.uniform(1.0, 1e6);
    CHECK(local_energy(2 * l, 1e-27, 500, 0.1) ==
          doctest::Approx(8.0 * local_energy(l, 1e-27, 500, 0.1)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(local_energy(-1.0, 1e-28, 1e3, 0.02), std::domain_error);
}

TEST_CASE("offload energy closed form") {
  // l = tau*B makes the exponent 1: tau*sigma2*(2-1)/||g||^2
  const double tau = 0.02, B = 2e6;
  CHECK(offload_energy_gain(0.0, 1.0, 1e-9, B, tau) == 0.0);
  CHECK(offload_energy_gain(tau * B, 1.0, 1e-9, B, tau) ==
        doctest::Approx(2e-11).epsilon(1e-12));
  // strictly increasing and midpoint-convex
  const double l1 = 1e4, l2 = 9e4;
  const double e1 = offload_energy_gain(l1, 2.0, 1e-9, B, tau);
  const double em = offload_energy_gain(0.5 * (l1 + l2), 2.0, 1e-9, B, tau);
  const double e2 = offload_energy_gain(l2, 2.0, 1e-9, B, tau);
  CHECK(e1 < em);
  CHECK(em < e2);
  CHECK(em <= 0.5 * (e1 + e2) + 1e-15);
  CHECK_THROWS_AS(offload_energy_gain(1.0, 0.0, 1e-9, B, tau), std::domain_error);
}

TEST_CASE("harvested energy of MRC and orthogonal channels") {
  Substream rs(17);
  const int Nt = 4;
  std::vector<cxd> h(Nt);
  for (cxd& z : h) z = rs.cnormal();
  const double p = 2.5, eta = 0.3, tau = 0.02;
  CMat s = mrc_covariance(h, p);
  CHECK(s.trace_real() == doctest::Approx(p).epsilon(1e-12));
  CHECK(harvested_energy(s, h, eta, tau) ==
        doctest::Approx(tau * eta * p * norm2(h)).epsilon(1e-10));
  CHECK(harvested_energy(CMat::zero(Nt), h, eta, tau) == 0.0);
  // a vector orthogonal to h harvests nothing from the MRC beam
  std::vector<cxd> v(Nt);
  for (cxd& z : v) z = rs.cnormal();
  const cxd c = dot_conj(h, v) / norm2(h);
  for (int i = 0; i < Nt; ++i) v[i] -= c * h[i];
  CHECK(std::abs(harvested_energy(s, v, eta, tau)) <= 1e-12 * p * norm2(v) + 1e-15);
}

TEST_CASE("mec energy equals local energy with AP constants") {
  CHECK(mec_energy(1e5, 1e-29, 1e3, 0.02) == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(mec_energy(12345.0, 1e-28, 1e3, 0.02) ==
        doctest::Approx(local_energy(12345.0, 1e-28, 1e3, 0.02)).epsilon(1e-12));
}

TEST_CASE("total objective: trace term and additivity across slots") {
  SystemParams p = tiny_params(2, 3, 2);
  Allocation a = Allocation::zero(2, 3, 2);
  CHECK(total_objective(a, p) == 0.0);
  CMat s = CMat::identity(2);
  s *= 0.5;  // trace 1 W
  a.set_covariance(0, s);
  CHECK(total_objective(a, p) == doctest::Approx(0.02).epsilon(1e-12));

  // random allocation matches the term-by-term series
  Substream rs(23);
  for (int i = 0; i < 3; ++i) {
    CMat cov(2, 2);
    std::vector<cxd> v(2);
    for (cxd& z : v) z = rs.cnormal();
    cov.add_rank1(v, rs.uniform(0.0, 2.0));
    a.set_covariance(i, cov);
    if (i >= 1) a.mec_bits[i] = rs.uniform(0.0, 1e5);
  }
  double expect = 0.0;
  for (int i = 0; i < 3; ++i) expect += p.slot_duration * a.covariance(i).trace_real();
  for (int i = 1; i < 3; ++i)
    expect += mec_energy(a.mec_bits[i], p.ap_capacitance, p.ap_cycles_per_bit, p.slot_duration);
  CHECK(total_objective(a, p) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("check_feasibility flags the right families") {
  SystemParams p = tiny_params(1, 2, 2);
  Scenario scen = tiny_scenario(5);
  FeasibilityTolerances tol = FeasibilityTolerances::scaled(scen, p);

  // all-zero allocation: deadline violated by the total arrivals
  Allocation zero = Allocation::zero(1, 2, 2);
  FeasibilityReport r = check_feasibility(zero, scen, p, tol);
  CHECK_FALSE(r.feasible);
  CHECK(r.user_deadline ==
        doctest::Approx(scen.arrival(0, 0) + scen.arrival(0, 1)).epsilon(1e-12));

  // executing bits before arrival: causality violation equals the early amount
  Allocation early = Allocation::zero(1, 2, 2);
  early.local(0, 0) = scen.arrival(0, 0) + 1000.0;
  early.local(0, 1) = scen.arrival(0, 1) - 1000.0;
  FeasibilityReport r2 = check_feasibility(early, scen, p, tol);
  CHECK(r2.user_task_causality == doctest::Approx(1000.0).epsilon(1e-9));

  // pure local computing sized to arrivals with ample WPT is feasible
  Allocation ok = Allocation::zero(1, 2, 2);
  for (int i = 0; i < 2; ++i) {
    ok.local(0, i) = scen.arrival(0, i);
    const double need = local_energy(ok.local(0, i), p.user_capacitance[0],
                                     p.user_cycles_per_bit[0], p.slot_duration);
    const double power =
        2.0 * need / (p.slot_duration * p.harvest_efficiency[0] * scen.h_gain(0, i));
    ok.set_covariance(i, mrc_covariance(scen.h(0, i), power));
  }
  FeasibilityReport r3 = check_feasibility(ok, scen, p, tol);
  CHECK(r3.feasible);
}

TEST_CASE("all four energies are nonnegative, zero at zero, midpoint convex") {
  Substream rs(99);
  for (int trial = 0; trial < 50; ++trial) {
    const double za = rs.uniform(1e-29, 1e-27);
    const double cc = rs.uniform(100.0, 2000.0);
    const double tau = rs.uniform(0.01, 0.1);
    const double g2 = rs.uniform(1e-6, 1e-3);
    const double a = rs.uniform(0.0, 1e6), b = rs.uniform(0.0, 1e6);
    auto conv = [&](auto f) {
      const double fm = f(0.5 * (a + b));
      CHECK(fm <= 0.5 * (f(a) + f(b)) + 1e-9 * (1.0 + std::abs(f(a)) + std::abs(f(b))));
      CHECK(f(a) >= 0.0);
      CHECK(f(0.0) == 0.0);
    };
    conv([&](double l) { return local_energy(l, za, cc, tau); });
    conv([&](double l) { return offload_energy_gain(l, g2, 1e-9, 2e6, tau); });
    conv([&](double l) { return mec_energy(l, za, cc, tau); });
  }
}

}  // TEST_SUITE
