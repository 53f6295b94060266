// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "wpmec/scenario.hpp"

using namespace wpmec;

namespace {

SystemParams params(int K, int N, int Nt = 4) {
  return SystemParams::uniform(K, N, Nt, 0.02, 2e6, 1e-9, 0.3, 1e-28, 1e-29, 1e3, 1e3);
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("channel generation is deterministic and matches the mean-power law") {
  SystemParams p = params(2, 50);
  ChannelGeometry geom = ChannelGeometry::uniform(2, 3.0, 3.0, -32.0, 3.0);
  Scenario a = make_scenario(42, geom, 5e5, 1e6, p);
  Scenario b = make_scenario(42, geom, 5e5, 1e6, p);
  CHECK(a.wpt_channels == b.wpt_channels);
  CHECK(a.offload_channels == b.offload_channels);
  CHECK(a.arrivals == b.arrivals);

  // E||h||^2 = Omega0 d^-alpha * Nt over many cells (5% tolerance).
  SystemParams pbig = params(1, 10000);
  ChannelGeometry g1 = ChannelGeometry::uniform(1, 3.0, 3.0, -32.0, 3.0);
  Scenario big = make_scenario(7, g1, 0.0, 0.0, pbig);
  double mean = 0.0;
  for (int i = 0; i < pbig.num_slots; ++i) mean += big.h_gain(0, i);
  mean /= pbig.num_slots;
  const double expect = g1.reference_pathloss * std::pow(3.0, -3.0) * 4.0;
  CHECK(std::abs(mean - expect) <= 0.05 * expect);
}

TEST_CASE("pure line-of-sight limit") {
  SystemParams p = params(1, 3);
  ChannelGeometry geom = ChannelGeometry::uniform(1, 2.0, 3.0, -32.0, 1e12);
  Scenario s = make_scenario(1, geom, 0.0, 0.0, p);
  const double expect = geom.reference_pathloss * std::pow(2.0, -3.0) * 4.0;
  for (int i = 0; i < 3; ++i)
    CHECK(s.h_gain(0, i) == doctest::Approx(expect).epsilon(1e-4));
}

TEST_CASE("task generation: degenerate interval and sample mean") {
  SystemParams p = params(1, 10000);
  Scenario s = Scenario::empty(1, p.num_slots, 4);
  gen_tasks(3, 777.0, 777.0, p, s);
  for (int i = 0; i < p.num_slots; ++i) CHECK(s.arrival(0, i) == 777.0);

  const double a_mean = 2.5e5;
  gen_tasks(5, 0.0, 2.0 * a_mean, p, s);
  double mean = 0.0;
  for (int i = 0; i < p.num_slots; ++i) mean += s.arrival(0, i);
  mean /= p.num_slots;
  CHECK(std::abs(mean - a_mean) <= 0.03 * a_mean);
  CHECK_THROWS_AS(gen_tasks(1, 10.0, 5.0, p, s), std::invalid_argument);
}

TEST_CASE("predictions: zero error is the identity, relative error std matches") {
  SystemParams p = params(1, 5000);
  ChannelGeometry geom = ChannelGeometry::uniform(1, 3.0, 3.0, -32.0, 3.0);
  Scenario s = make_scenario(11, geom, 5e5, 1e6, p);

  PredictedScenario exact = gen_predictions(s, {0.0, 0.0, 0.0}, geom, 9);
  CHECK(exact.arrivals_hat == s.arrivals);
  CHECK(exact.wpt_hat == s.wpt_channels);
  CHECK(exact.offload_hat == s.offload_channels);

  PredictedScenario noisy = gen_predictions(s, {0.2, 0.0, 0.0}, geom, 9);
  double var = 0.0;
  int n = 0;
  for (int i = 0; i < p.num_slots; ++i) {
    const double a = s.arrival(0, i);
    if (noisy.arrival_hat(0, i) > 0.0) {  // unclamped samples only
      const double rel = (noisy.arrival_hat(0, i) - a) / a;
      var += rel * rel;
      ++n;
    }
  }
  const double sd = std::sqrt(var / n);
  CHECK(sd >= 0.19);
  CHECK(sd <= 0.21);
}

TEST_CASE("negative predicted arrivals are clamped to zero") {
  SystemParams p = params(1, 2000);
  ChannelGeometry geom = ChannelGeometry::uniform(1, 3.0, 3.0, -32.0, 3.0);
  Scenario s = make_scenario(13, geom, 1.0, 2.0, p);
  PredictedScenario noisy = gen_predictions(s, {5.0, 0.0, 0.0}, geom, 10);
  bool any_zero = false;
  for (double a : noisy.arrivals_hat) {
    CHECK(a >= 0.0);
    any_zero = any_zero || a == 0.0;
  }
  CHECK(any_zero);  // sigma_A = 5 drives many relative errors below -1
}

TEST_CASE("json round trip") {
  SystemParams p = params(2, 3);
  ChannelGeometry geom = ChannelGeometry::uniform(2, 3.0, 3.0, -32.0, 3.0);
  Scenario s = make_scenario(21, geom, 5e5, 1e6, p);
  Scenario back = scenario_from_json(scenario_to_json(s));
  CHECK(back.arrivals == s.arrivals);
  CHECK(back.wpt_channels == s.wpt_channels);
  CHECK(back.offload_channels == s.offload_channels);

  PredictedScenario ps = gen_predictions(s, {0.2, 0.2, 0.2}, geom, 4);
  PredictedScenario pback = predicted_from_json(predicted_to_json(ps));
  CHECK(pback.arrivals_hat == ps.arrivals_hat);
  CHECK(pback.wpt_hat == ps.wpt_hat);
  CHECK(pback.truth.arrivals == s.arrivals);
}

}  // TEST_SUITE
