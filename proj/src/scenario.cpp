// SPDX-License-Identifier: Apache-2.0

#include "wpmec/scenario.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "wpmec/rng.hpp"

namespace wpmec {

namespace {
// Stream tags keep (user, slot, quantity) draws independent.
enum StreamTag : uint64_t {
  kTagWpt = 1,
  kTagOff = 2,
  kTagArrival = 3,
  kTagPredArrival = 4,
  kTagPredWpt = 5,
  kTagPredOff = 6,
};
}  // namespace

double ChannelGeometry::db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

ChannelGeometry ChannelGeometry::uniform(int K, double d, double alpha, double omega0_db,
                                         double rician) {
  ChannelGeometry g;
  g.distances.assign(K, d);
  g.pathloss_exponent = alpha;
  g.reference_pathloss = db_to_linear(omega0_db);
  g.rician_factor = rician;
  g.validate(K);
  return g;
}

void ChannelGeometry::validate(int K) const {
  if (static_cast<int>(distances.size()) != K)
    throw std::invalid_argument("ChannelGeometry: distances size mismatch");
  for (double d : distances)
    if (!(d > 0.0)) throw std::invalid_argument("ChannelGeometry: nonpositive distance");
  if (!(pathloss_exponent > 0.0))
    throw std::invalid_argument("ChannelGeometry: nonpositive pathloss exponent");
  if (!(reference_pathloss > 0.0 && reference_pathloss <= 1.0))
    throw std::invalid_argument("ChannelGeometry: reference pathloss must be in (0,1] linear");
  if (!(rician_factor >= 0.0))
    throw std::invalid_argument("ChannelGeometry: negative Rician factor");
}

double ChannelGeometry::los_coeff(int k) const {
  const double pl = reference_pathloss * std::pow(distances[k], -pathloss_exponent);
  return std::sqrt(rician_factor * pl / (1.0 + rician_factor));
}

double ChannelGeometry::scatter_coeff(int k) const {
  const double pl = reference_pathloss * std::pow(distances[k], -pathloss_exponent);
  return std::sqrt(pl / (1.0 + rician_factor));
}

namespace {

void fill_rician(std::span<cxd> out, Substream& rs, double los, double scatter) {
  // Re-draw on the (probability-zero) all-zero scatter vector.
  for (;;) {
    double n2 = 0.0;
    for (cxd& e : out) {
      const cxd w = rs.cnormal();
      e = cxd(los, 0.0) + scatter * w;
      n2 += std::norm(e);
    }
    if (n2 > 0.0) return;
  }
}

}  // namespace

void gen_channels(uint64_t seed, const ChannelGeometry& geom, const SystemParams& p,
                  Scenario& scen) {
  geom.validate(p.num_users);
  for (int k = 0; k < p.num_users; ++k) {
    const double los = geom.los_coeff(k);
    const double sc = geom.scatter_coeff(k);
    for (int i = 0; i < p.num_slots; ++i) {
      Substream rh = substream(seed, kTagWpt, k, i);
      fill_rician(scen.h(k, i), rh, los, sc);
      Substream rg = substream(seed, kTagOff, k, i);
      fill_rician(scen.g(k, i), rg, los, sc);
    }
  }
}

void gen_tasks(uint64_t seed, double low, double high, const SystemParams& p, Scenario& scen) {
  if (!(low >= 0.0) || low > high) throw std::invalid_argument("gen_tasks: bad interval");
  for (int k = 0; k < p.num_users; ++k)
    for (int i = 0; i < p.num_slots; ++i) {
      Substream r = substream(seed, kTagArrival, k, i);
      scen.arrival(k, i) = r.uniform(low, high);
    }
}

Scenario make_scenario(uint64_t seed, const ChannelGeometry& geom, double arr_low,
                       double arr_high, const SystemParams& p) {
  Scenario s = Scenario::empty(p.num_users, p.num_slots, p.num_antennas);
  gen_channels(seed, geom, p, s);
  gen_tasks(seed, arr_low, arr_high, p, s);
  return s;
}

PredictedScenario gen_predictions(const Scenario& truth, const PredictionErrorModel& err,
                                  const ChannelGeometry& geom, uint64_t seed) {
  PredictedScenario ps;
  ps.truth = truth;
  const int K = truth.K, N = truth.N, Nt = truth.Nt;
  ps.arrivals_hat.resize(static_cast<size_t>(K) * N);
  ps.wpt_hat.resize(static_cast<size_t>(K) * N * Nt);
  ps.offload_hat.resize(static_cast<size_t>(K) * N * Nt);

  for (int k = 0; k < K; ++k) {
    const double los = geom.los_coeff(k);
    for (int i = 0; i < N; ++i) {
      Substream ra = substream(seed, kTagPredArrival, k, i);
      const double rel = 1.0 + err.sigma_A * ra.normal();
      ps.arrivals_hat[static_cast<size_t>(k) * N + i] = std::max(0.0, rel * truth.arrival(k, i));

      // Relative perturbation applies to the scattered component only; the
      // LoS part is deterministic geometry.
      Substream rh = substream(seed, kTagPredWpt, k, i);
      Substream rg = substream(seed, kTagPredOff, k, i);
      auto h_true = truth.h(k, i);
      auto g_true = truth.g(k, i);
      for (int a = 0; a < Nt; ++a) {
        const cxd h_sc = h_true[a] - cxd(los, 0.0);
        const cxd g_sc = g_true[a] - cxd(los, 0.0);
        const cxd dh = err.sigma_h * rh.cnormal();
        const cxd dg = err.sigma_g * rg.cnormal();
        ps.wpt_hat[(static_cast<size_t>(k) * N + i) * Nt + a] = cxd(los, 0.0) + (1.0 + dh) * h_sc;
        ps.offload_hat[(static_cast<size_t>(k) * N + i) * Nt + a] =
            cxd(los, 0.0) + (1.0 + dg) * g_sc;
      }
    }
  }
  return ps;
}

// --- JSON serialization ---

namespace {

using nlohmann::json;

json complex_array(const std::vector<cxd>& v) {
  json arr = json::array();
  for (const cxd& z : v) arr.push_back({z.real(), z.imag()});
  return arr;
}

std::vector<cxd> complex_array_from(const json& arr) {
  std::vector<cxd> v;
  v.reserve(arr.size());
  for (const auto& e : arr) v.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
  return v;
}

json scenario_json(const Scenario& s) {
  return json{{"num_users", s.K},
              {"num_slots", s.N},
              {"num_antennas", s.Nt},
              {"arrivals", s.arrivals},
              {"wpt_channels", complex_array(s.wpt_channels)},
              {"offload_channels", complex_array(s.offload_channels)}};
}

Scenario scenario_from(const json& j) {
  Scenario s;
  s.K = j.at("num_users").get<int>();
  s.N = j.at("num_slots").get<int>();
  s.Nt = j.at("num_antennas").get<int>();
  s.arrivals = j.at("arrivals").get<std::vector<double>>();
  s.wpt_channels = complex_array_from(j.at("wpt_channels"));
  s.offload_channels = complex_array_from(j.at("offload_channels"));
  const size_t cells = static_cast<size_t>(s.K) * s.N;
  if (s.arrivals.size() != cells || s.wpt_channels.size() != cells * s.Nt ||
      s.offload_channels.size() != cells * s.Nt)
    throw std::invalid_argument("scenario_from_json: inconsistent dimensions");
  return s;
}

}  // namespace

std::string scenario_to_json(const Scenario& s) { return scenario_json(s).dump(); }

Scenario scenario_from_json(const std::string& text) {
  return scenario_from(json::parse(text));
}

std::string predicted_to_json(const PredictedScenario& ps) {
  json j{{"truth", scenario_json(ps.truth)},
         {"arrivals_hat", ps.arrivals_hat},
         {"wpt_hat", complex_array(ps.wpt_hat)},
         {"offload_hat", complex_array(ps.offload_hat)}};
  return j.dump();
}

PredictedScenario predicted_from_json(const std::string& text) {
  const json j = json::parse(text);
  PredictedScenario ps;
  ps.truth = scenario_from(j.at("truth"));
  ps.arrivals_hat = j.at("arrivals_hat").get<std::vector<double>>();
  ps.wpt_hat = complex_array_from(j.at("wpt_hat"));
  ps.offload_hat = complex_array_from(j.at("offload_hat"));
  return ps;
}

}  // namespace wpmec
