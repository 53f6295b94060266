// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "wpmec/offline.hpp"
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

double harvested_cum(const WptSolution& sol, const Scenario& scen, const SystemParams& p,
                     int k, int upto) {
  double cum = 0.0;
  for (int j = 0; j <= upto; ++j)
    cum += harvested_energy(sol.covariance(j, scen.Nt), scen.h(k, j), p.harvest_efficiency[k],
                            p.slot_duration);
  return cum;
}

}  // namespace

TEST_SUITE("wpt") {

TEST_CASE("mrc covariance basics") {
  Substream rs(5);
  std::vector<cxd> h(4);
  for (cxd& z : h) z = rs.cnormal();
  CHECK(mrc_covariance(h, 0.0).frob_norm() == 0.0);
  CMat s = mrc_covariance(h, 3.25);
  CHECK(s.trace_real() == doctest::Approx(3.25).epsilon(1e-12));
  EigResult e = hermitian_eig(s);
  CHECK(e.values[3] == doctest::Approx(3.25).epsilon(1e-10));  // rank one
  CHECK(std::abs(e.values[2]) <= 1e-12 * 3.25);
  CHECK_THROWS_AS(mrc_covariance(std::vector<cxd>(4, cxd(0.0)), 1.0), std::domain_error);
}

TEST_CASE("projection onto the channel span preserves harvest and shrinks trace") {
  Substream rs(31);
  const int Nt = 4, K = 2;
  std::vector<std::vector<cxd>> hs(K, std::vector<cxd>(Nt));
  for (auto& h : hs)
    for (cxd& z : h) z = rs.cnormal();
  // random PSD S
  CMat s(Nt, Nt);
  for (int r = 0; r < 3; ++r) {
    std::vector<cxd> v(Nt);
    for (cxd& z : v) z = rs.cnormal();
    s.add_rank1(v, rs.uniform(0.1, 1.0));
  }
  // orthonormal basis of span{h1,h2} via Gram-Schmidt
  std::vector<std::vector<cxd>> basis;
  for (const auto& h : hs) {
    std::vector<cxd> v = h;
    for (const auto& b : basis) {
      const cxd c = dot_conj(b, v);
      for (int i = 0; i < Nt; ++i) v[i] -= c * b[i];
    }
    const double n = std::sqrt(norm2(v));
    if (n > 1e-12) {
      for (cxd& z : v) z /= n;
      basis.push_back(v);
    }
  }
  // P S P with P = sum b b^H
  CMat proj(Nt, Nt);
  for (const auto& b : basis) proj.add_rank1(b, 1.0);
  auto mat_mul = [&](const CMat& a, const CMat& b) {
    CMat c(Nt, Nt);
    for (int j = 0; j < Nt; ++j)
      for (int i = 0; i < Nt; ++i) {
        cxd acc(0.0);
        for (int k = 0; k < Nt; ++k) acc += a(i, k) * b(k, j);
        c(i, j) = acc;
      }
    return c;
  };
  CMat psp = mat_mul(mat_mul(proj, s), proj);
  psp.symmetrize_hermitian();
  CHECK(psp.trace_real() <= s.trace_real() + 1e-10);
  for (const auto& h : hs)
    CHECK(quad_form(psp, h) == doctest::Approx(quad_form(s, h)).epsilon(1e-9));
}

TEST_CASE("zero demands give a zero solution") {
  Scenario scen = scenario(3, 2, 4);
  SystemParams p = params(2, 4);
  EnergyDemandProfile dem = EnergyDemandProfile::zero(2, 4);
  WptChannels ch{2, 4, 4, scen.wpt_channels.data()};
  WptSolution sol = min_power_wpt(dem, ch, p.harvest_efficiency, p.slot_duration);
  CHECK(sol.total_energy == 0.0);
  CHECK(sol.converged);
  for (const cxd& z : sol.covariances) CHECK(z == cxd(0.0));
}

TEST_CASE("single-user solutions match the dominating-slot greedy optimum") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    const int N = 5;
    Scenario scen = scenario(seed, 1, N);
    SystemParams p = params(1, N);
    Substream rs(seed * 97);
    EnergyDemandProfile dem = EnergyDemandProfile::zero(1, N);
    double cum = 0.0;
    for (int i = 0; i < N; ++i) {
      cum += rs.uniform(0.0, 2.0);
      dem.at(0, i) = cum;
    }
    WptChannels ch{1, N, 4, scen.wpt_channels.data()};
    WptSolution sol = min_power_wpt(dem, ch, p.harvest_efficiency, p.slot_duration, 1e-6);
    CHECK(sol.converged);
    CHECK(sol.gap <= 1e-6 * (1.0 + sol.total_energy));
    CHECK(sol.gap >= -1e-9 * (1.0 + sol.total_energy));

    // greedy optimum: cumulative increments priced at the best channel so far
    std::vector<double> gains(N);
    for (int i = 0; i < N; ++i) gains[i] = scen.h_gain(0, i);
    double best = 0.0, opt = 0.0, prev = 0.0;
    for (int i = 0; i < N; ++i) {
      best = std::max(best, gains[i]);
      opt += (dem.at(0, i) - prev) / (p.harvest_efficiency[0] * best);
      prev = dem.at(0, i);
    }
    CHECK(sol.total_energy == doctest::Approx(opt).epsilon(1e-6));

    // cumulative feasibility
    for (int i = 0; i < N; ++i)
      CHECK(harvested_cum(sol, scen, p, 0, i) >= dem.at(0, i) * (1.0 - 1e-9) - 1e-12);
  }
}

TEST_CASE("two orthogonal users in one slot cost the sum of MRC powers") {
  const int Nt = 4;
  SystemParams p = params(2, 1, Nt);
  Scenario scen = Scenario::empty(2, 1, Nt);
  // orthogonal unit-ish channels
  scen.wpt_channels[0] = cxd(2.0, 0.0);
  scen.wpt_channels[Nt + 1] = cxd(0.0, 1.5);
  scen.offload_channels = scen.wpt_channels;
  EnergyDemandProfile dem = EnergyDemandProfile::zero(2, 1);
  dem.at(0, 0) = 3.0;
  dem.at(1, 0) = 5.0;
  WptChannels ch{2, 1, Nt, scen.wpt_channels.data()};
  WptSolution sol = min_power_wpt(dem, ch, p.harvest_efficiency, p.slot_duration, 1e-8);
  const double expect = 3.0 / (p.harvest_efficiency[0] * 4.0) +
                        5.0 / (p.harvest_efficiency[1] * 2.25);
  CHECK(sol.total_energy == doctest::Approx(expect).epsilon(1e-6));
  CHECK(sol.gap <= 1e-8 * (1 + sol.total_energy));
}

TEST_CASE("multiuser instances: feasible primal, tight certificate, PSD output") {
  for (uint64_t seed = 1; seed <= 6; ++seed) {
    const int K = 3, N = 6;
    Scenario scen = scenario(seed + 40, K, N);
    SystemParams p = params(K, N);
    Substream rs(seed * 13);
    EnergyDemandProfile dem = EnergyDemandProfile::zero(K, N);
    for (int k = 0; k < K; ++k) {
      double cum = 0.0;
      for (int i = 0; i < N; ++i) {
        if (rs.uniform01() < 0.7) cum += rs.uniform(0.0, 3.0);
        dem.at(k, i) = cum;
      }
    }
    WptChannels ch{K, N, 4, scen.wpt_channels.data()};
    WptSolution sol = min_power_wpt(dem, ch, p.harvest_efficiency, p.slot_duration, 1e-6);
    CHECK(sol.converged);
    CHECK(sol.gap >= -1e-9 * (1.0 + sol.total_energy));
    CHECK(sol.gap <= 1e-6 * (1.0 + sol.total_energy));
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < N; ++i) {
        CHECK(harvested_cum(sol, scen, p, k, i) >= dem.at(k, i) * (1.0 - 1e-8) - 1e-12);
        CHECK(sol.dual_certificate[static_cast<size_t>(k) * N + i] >= 0.0);
      }
    for (int i = 0; i < N; ++i) {
      CMat s = sol.covariance(i, 4);
      CHECK(min_eig(s) >= -1e-9 * std::max(1.0, s.trace_real()));
    }
  }
}

TEST_CASE("per-slot value function is convex and degree-1 homogeneous") {
  const int K = 2, Nt = 4;
  Scenario scen = scenario(77, K, 1, Nt);
  SystemParams p = params(K, 1, Nt);
  WptChannels ch{K, 1, Nt, scen.wpt_channels.data()};
  auto value = [&](double e0, double e1) {
    EnergyDemandProfile dem = EnergyDemandProfile::zero(K, 1);
    dem.at(0, 0) = e0;
    dem.at(1, 0) = e1;
    return min_power_wpt(dem, ch, p.harvest_efficiency, p.slot_duration, 1e-7).total_energy;
  };
  Substream rs(123);
  for (int t = 0; t < 5; ++t) {
    const double a0 = rs.uniform(0.1, 2.0), a1 = rs.uniform(0.1, 2.0);
    const double b0 = rs.uniform(0.1, 2.0), b1 = rs.uniform(0.1, 2.0);
    const double c = rs.uniform(0.5, 3.0);
    CHECK(value(c * a0, c * a1) == doctest::Approx(c * value(a0, a1)).epsilon(1e-5));
    const double mid = value(0.5 * (a0 + b0), 0.5 * (a1 + b1));
    CHECK(mid <= 0.5 * (value(a0, a1) + value(b0, b1)) + 1e-6 * (1.0 + mid));
  }
}

}  // TEST_SUITE
