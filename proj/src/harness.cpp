// SPDX-License-Identifier: Apache-2.0

#include "wpmec/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "wpmec/baselines.hpp"
#include "wpmec/rng.hpp"

namespace wpmec {

std::string to_string(ExperimentFamily f) {
  switch (f) {
    case ExperimentFamily::Fig2Trace: return "fig2_trace";
    case ExperimentFamily::Fig3VsAmean: return "fig3_vs_Amean";
    case ExperimentFamily::Fig4VsN: return "fig4_vs_N";
    case ExperimentFamily::Fig5OnlineVsN: return "fig5_online_vs_N";
    case ExperimentFamily::Fig6VsM: return "fig6_vs_M";
    case ExperimentFamily::Fig7VsSigma: return "fig7_vs_sigma";
  }
  return "?";
}

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::Offline: return "offline";
    case Scheme::LocalOnly: return "local_only";
    case Scheme::FullOffload: return "full_offload";
    case Scheme::Myopic: return "myopic";
    case Scheme::Online: return "online";
    case Scheme::OnlineLocalOnly: return "online_local_only";
    case Scheme::OnlineFullOffload: return "online_full_offload";
    case Scheme::OnlineMyopic: return "online_myopic";
  }
  return "?";
}

ExperimentFamily family_from_string(const std::string& s) {
  for (ExperimentFamily f :
       {ExperimentFamily::Fig2Trace, ExperimentFamily::Fig3VsAmean, ExperimentFamily::Fig4VsN,
        ExperimentFamily::Fig5OnlineVsN, ExperimentFamily::Fig6VsM,
        ExperimentFamily::Fig7VsSigma})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown experiment family: " + s);
}

Scheme scheme_from_string(const std::string& s) {
  for (Scheme k : {Scheme::Offline, Scheme::LocalOnly, Scheme::FullOffload, Scheme::Myopic,
                   Scheme::Online, Scheme::OnlineLocalOnly, Scheme::OnlineFullOffload,
                   Scheme::OnlineMyopic})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown scheme: " + s);
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("ExperimentConfig: trials must be >= 1");
  if (sweep.empty()) throw std::invalid_argument("ExperimentConfig: empty sweep");
  if (schemes.empty()) throw std::invalid_argument("ExperimentConfig: no schemes selected");
}

std::string config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["family"] = to_string(c.family);
  j["sweep"] = c.sweep;
  j["trials"] = c.trials;
  j["base_seed"] = c.base_seed;
  j["num_users"] = c.num_users;
  j["num_slots"] = c.num_slots;
  j["num_antennas"] = c.num_antennas;
  j["slot_duration"] = c.slot_duration;
  j["bandwidth"] = c.bandwidth;
  j["noise_power"] = c.noise_power;
  j["eta"] = c.eta;
  j["zeta_user"] = c.zeta_user;
  j["zeta_ap"] = c.zeta_ap;
  j["cycles_user"] = c.cycles_user;
  j["cycles_ap"] = c.cycles_ap;
  j["distance"] = c.distance;
  j["pathloss_exponent"] = c.pathloss_exponent;
  j["omega0_db"] = c.omega0_db;
  j["rician"] = c.rician;
  j["arrival_low"] = c.arrival_low;
  j["arrival_high"] = c.arrival_high;
  j["sigma_A"] = c.sigma_A;
  j["sigma_h"] = c.sigma_h;
  j["sigma_g"] = c.sigma_g;
  j["sigma_axis"] = c.sigma_axis;
  std::vector<std::string> names;
  for (Scheme s : c.schemes) names.push_back(to_string(s));
  j["schemes"] = names;
  j["window"] = c.window;
  j["engine"] = c.engine == DualEngine::Auto ? "auto"
                : c.engine == DualEngine::Ellipsoid ? "ellipsoid"
                                                    : "fast";
  j["energy_carry"] = c.energy_carry;
  j["trial_time_cap_s"] = c.trial_time_cap_s;
  j["threads"] = c.threads;
  j["out"] = c.out;
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  ExperimentConfig c;
  c.family = family_from_string(j.at("family").get<std::string>());
  c.sweep = j.at("sweep").get<std::vector<double>>();
  c.trials = j.value("trials", c.trials);
  c.base_seed = j.value("base_seed", c.base_seed);
  c.num_users = j.value("num_users", c.num_users);
  c.num_slots = j.value("num_slots", c.num_slots);
  c.num_antennas = j.value("num_antennas", c.num_antennas);
  c.slot_duration = j.value("slot_duration", c.slot_duration);
  c.bandwidth = j.value("bandwidth", c.bandwidth);
  c.noise_power = j.value("noise_power", c.noise_power);
  c.eta = j.value("eta", c.eta);
  c.zeta_user = j.value("zeta_user", c.zeta_user);
  c.zeta_ap = j.value("zeta_ap", c.zeta_ap);
  c.cycles_user = j.value("cycles_user", c.cycles_user);
  c.cycles_ap = j.value("cycles_ap", c.cycles_ap);
  c.distance = j.value("distance", c.distance);
  c.pathloss_exponent = j.value("pathloss_exponent", c.pathloss_exponent);
  c.omega0_db = j.value("omega0_db", c.omega0_db);
  c.rician = j.value("rician", c.rician);
  c.arrival_low = j.value("arrival_low", c.arrival_low);
  c.arrival_high = j.value("arrival_high", c.arrival_high);
  c.sigma_A = j.value("sigma_A", c.sigma_A);
  c.sigma_h = j.value("sigma_h", c.sigma_h);
  c.sigma_g = j.value("sigma_g", c.sigma_g);
  c.sigma_axis = j.value("sigma_axis", c.sigma_axis);
  if (j.contains("schemes"))
    for (const auto& s : j.at("schemes")) c.schemes.push_back(scheme_from_string(s));
  c.window = j.value("window", c.window);
  const std::string eng = j.value("engine", std::string("auto"));
  c.engine = eng == "ellipsoid" ? DualEngine::Ellipsoid
             : eng == "fast"    ? DualEngine::Fast
                                : DualEngine::Auto;
  c.energy_carry = j.value("energy_carry", c.energy_carry);
  c.trial_time_cap_s = j.value("trial_time_cap_s", c.trial_time_cap_s);
  c.threads = j.value("threads", c.threads);
  c.out = j.value("out", c.out);
  return c;
}

namespace {

struct TrialSetting {
  SystemParams params;
  ChannelGeometry geom;
  PredictionErrorModel err;
  double arr_low, arr_high;
  int window;
};

TrialSetting setting_for(const ExperimentConfig& c, double sweep_value) {
  TrialSetting s;
  int N = c.num_slots;
  double arr_low = c.arrival_low, arr_high = c.arrival_high;
  int window = c.window;
  PredictionErrorModel err{c.sigma_A, c.sigma_h, c.sigma_g};
  switch (c.family) {
    case ExperimentFamily::Fig2Trace:
      break;
    case ExperimentFamily::Fig3VsAmean:
      arr_low = 0.0;
      arr_high = 2.0 * sweep_value;
      break;
    case ExperimentFamily::Fig4VsN:
    case ExperimentFamily::Fig5OnlineVsN:
      N = static_cast<int>(sweep_value + 0.5);
      break;
    case ExperimentFamily::Fig6VsM:
      window = static_cast<int>(sweep_value + 0.5);
      break;
    case ExperimentFamily::Fig7VsSigma:
      if (c.sigma_axis == "A")
        err.sigma_A = sweep_value;
      else if (c.sigma_axis == "h")
        err.sigma_h = sweep_value;
      else if (c.sigma_axis == "g")
        err.sigma_g = sweep_value;
      else
        throw std::invalid_argument("sigma_axis must be A, h or g");
      break;
  }
  s.params = SystemParams::uniform(c.num_users, N, c.num_antennas, c.slot_duration, c.bandwidth,
                                   c.noise_power, c.eta, c.zeta_user, c.zeta_ap, c.cycles_user,
                                   c.cycles_ap);
  s.geom = ChannelGeometry::uniform(c.num_users, c.distance, c.pathloss_exponent, c.omega0_db,
                                    c.rician);
  s.err = err;
  s.arr_low = arr_low;
  s.arr_high = arr_high;
  s.window = window;
  return s;
}

bool needs_predictions(const std::vector<Scheme>& schemes) {
  for (Scheme s : schemes)
    if (s == Scheme::Online || s == Scheme::OnlineLocalOnly ||
        s == Scheme::OnlineFullOffload || s == Scheme::OnlineMyopic)
      return true;
  return false;
}

struct CellResult {
  double energy = 0.0;
  double runtime = 0.0;
  bool ok = false;
};

}  // namespace

ResultTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const int S = static_cast<int>(cfg.sweep.size());
  const int T = cfg.trials;
  const int NS = static_cast<int>(cfg.schemes.size());
  std::vector<CellResult> cells(static_cast<size_t>(S) * T * NS);
  std::atomic<long> failures{0};

  OfflineOptions inner;
  inner.engine = cfg.engine;

  auto run_trial = [&](int si, int trial) {
    const TrialSetting st = setting_for(cfg, cfg.sweep[si]);
    const uint64_t seed = substream(cfg.base_seed, 777, si, trial).next_u64();
    const Scenario scen = make_scenario(seed, st.geom, st.arr_low, st.arr_high, st.params);
    PredictedScenario pred;
    if (needs_predictions(cfg.schemes))
      pred = gen_predictions(scen, st.err, st.geom, splitmix64(seed ^ 0xABCDEF0123456789ULL));
    const FeasibilityTolerances ftol = FeasibilityTolerances::scaled(scen, st.params);
    const auto t_start = std::chrono::steady_clock::now();

    for (int sc = 0; sc < NS; ++sc) {
      CellResult& cell =
          cells[(static_cast<size_t>(si) * T + trial) * NS + sc];
      if (cfg.trial_time_cap_s > 0.0) {
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        if (elapsed > cfg.trial_time_cap_s) {
          failures.fetch_add(1);
          continue;
        }
      }
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const Scheme scheme = cfg.schemes[sc];
        double objective = 0.0;
        bool ok = true;
        const int N = st.params.num_slots;
        switch (scheme) {
          case Scheme::Offline: {
            OfflineSolution sol = solve_offline(scen, st.params, inner);
            objective = sol.objective;
            ok = sol.feasibility.feasible;
            break;
          }
          case Scheme::LocalOnly: {
            OfflineSolution sol = solve_local_only(scen, st.params, inner);
            objective = sol.objective;
            ok = sol.feasibility.feasible;
            break;
          }
          case Scheme::FullOffload: {
            OfflineSolution sol = solve_full_offload(scen, st.params, inner);
            objective = sol.objective;
            ok = sol.feasibility.feasible;
            break;
          }
          case Scheme::Myopic: {
            OfflineSolution sol = solve_myopic(scen, st.params);
            objective = sol.objective;
            ok = sol.feasibility.feasible;
            break;
          }
          case Scheme::Online:
          case Scheme::OnlineLocalOnly:
          case Scheme::OnlineFullOffload:
          case Scheme::OnlineMyopic: {
            OnlineOptions oo;
            oo.inner = inner;
            oo.energy_carry = cfg.energy_carry;
            oo.window = scheme == Scheme::OnlineMyopic ? 1 : st.window;
            oo.restriction = scheme == Scheme::OnlineLocalOnly ? Restriction::LocalOnly
                             : scheme == Scheme::OnlineFullOffload ? Restriction::FullOffload
                                                                   : Restriction::None;
            OnlineResult res = solve_sliding_window(scen, pred, oo.window, st.params, oo);
            objective = res.realized_objective;
            // Conservation audit on the realized trajectory.
            const FeasibilityReport fr =
                check_feasibility(res.trajectory, scen, st.params, ftol);
            ok = fr.energy_harvesting <= ftol.energy && fr.user_task_causality <= ftol.bits &&
                 fr.user_deadline <= ftol.bits && fr.ap_task_causality <= ftol.bits &&
                 fr.ap_deadline <= ftol.bits;
            break;
          }
        }
        cell.energy = objective / N;
        cell.runtime =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        cell.ok = ok;
        if (!ok) failures.fetch_add(1);
      } catch (const std::exception&) {
        cell.ok = false;
        failures.fetch_add(1);
      }
    }
  };

  // Bounded worker pool over (sweep, trial) items; deterministic because
  // every cell is written independently and merged in index order.
  const long total_tasks = static_cast<long>(S) * T;
  long nthreads = cfg.threads > 0 ? cfg.threads
                                  : static_cast<long>(std::thread::hardware_concurrency());
  nthreads = std::max(1L, std::min(nthreads, total_tasks));
  std::atomic<long> next{0};
  auto worker = [&]() {
    for (;;) {
      const long id = next.fetch_add(1);
      if (id >= total_tasks) return;
      run_trial(static_cast<int>(id / T), static_cast<int>(id % T));
    }
  };
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ResultTable table;
  table.failures = failures.load();
  for (int si = 0; si < S; ++si)
    for (int sc = 0; sc < NS; ++sc) {
      double sum = 0.0, sum2 = 0.0, rt = 0.0;
      int n = 0;
      for (int trial = 0; trial < T; ++trial) {
        const CellResult& cell = cells[(static_cast<size_t>(si) * T + trial) * NS + sc];
        if (!cell.ok) continue;
        sum += cell.energy;
        sum2 += cell.energy * cell.energy;
        rt += cell.runtime;
        ++n;
      }
      ResultRow row;
      row.sweep = cfg.sweep[si];
      row.scheme = to_string(cfg.schemes[sc]);
      row.trials = n;
      if (n > 0) {
        row.mean_energy = sum / n;
        const double var = std::max(0.0, sum2 / n - row.mean_energy * row.mean_energy);
        row.stderr_mean = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
        row.runtime_s = rt / n;
      }
      table.rows.push_back(row);
    }

  if (cfg.family == ExperimentFamily::Fig2Trace) {
    // Qualitative per-slot trace of the first trial's offline solution.
    const TrialSetting st = setting_for(cfg, cfg.sweep[0]);
    const uint64_t seed = substream(cfg.base_seed, 777, 0, 0).next_u64();
    const Scenario scen = make_scenario(seed, st.geom, st.arr_low, st.arr_high, st.params);
    OfflineSolution sol = solve_offline(scen, st.params, inner);
    std::ofstream f(cfg.out + ".trace.csv");
    f << "slot,user,local_bits,offload_bits,mec_bits\n";
    char buf[160];
    for (int i = 0; i < scen.N; ++i)
      for (int k = 0; k < scen.K; ++k) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g\n", i + 1, k + 1,
                      sol.allocation.local(k, i), sol.allocation.offload(k, i),
                      k == 0 ? sol.allocation.mec_bits[i] : 0.0);
        f << buf;
      }
  }
  return table;
}

void emit_csv(const ResultTable& table, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("emit_csv: cannot open " + path);
  f << "sweep,scheme,mean_energy_J,stderr,trials,runtime_s\n";
  char buf[256];
  for (const ResultRow& r : table.rows) {
    std::snprintf(buf, sizeof(buf), "%.9g,%s,%.9g,%.9g,%d,%.9g\n", r.sweep, r.scheme.c_str(),
                  r.mean_energy, r.stderr_mean, r.trials, r.runtime_s);
    f << buf;
  }
  if (!f.good()) throw std::runtime_error("emit_csv: write failed for " + path);
}

void emit_plot_data(const ResultTable& table, const std::string& path) {
  std::vector<std::string> schemes;
  for (const ResultRow& r : table.rows)
    if (std::find(schemes.begin(), schemes.end(), r.scheme) == schemes.end())
      schemes.push_back(r.scheme);
  for (const std::string& s : schemes) {
    std::ofstream f(path + "." + s + ".dat");
    if (!f) throw std::runtime_error("emit_plot_data: cannot open series file");
    char buf[160];
    for (const ResultRow& r : table.rows)
      if (r.scheme == s) {
        std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", r.sweep, r.mean_energy,
                      r.stderr_mean);
        f << buf;
      }
  }
}

}  // namespace wpmec
