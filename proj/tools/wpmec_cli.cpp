// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: single-instance solves (offline / online /
// baseline) and batch experiments.  Instance parameters come from the same
// JSON document the experiment runner uses; the sweep is ignored for single
// solves.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "wpmec/baselines.hpp"
#include "wpmec/harness.hpp"
#include "wpmec/rng.hpp"

using namespace wpmec;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << text;
  if (!f.good()) throw std::runtime_error("write failed for " + path);
}

struct InstanceArgs {
  std::string config_path;
  uint64_t seed = 1;
  std::string out;
  std::string engine = "auto";
};

ExperimentConfig load_config(const std::string& path) {
  ExperimentConfig cfg = config_from_json(read_file(path));
  return cfg;
}

Scenario build_instance(const ExperimentConfig& cfg, uint64_t seed, SystemParams* p_out) {
  SystemParams p = SystemParams::uniform(cfg.num_users, cfg.num_slots, cfg.num_antennas,
                                         cfg.slot_duration, cfg.bandwidth, cfg.noise_power,
                                         cfg.eta, cfg.zeta_user, cfg.zeta_ap, cfg.cycles_user,
                                         cfg.cycles_ap);
  ChannelGeometry geom = ChannelGeometry::uniform(cfg.num_users, cfg.distance,
                                                  cfg.pathloss_exponent, cfg.omega0_db,
                                                  cfg.rician);
  *p_out = p;
  return make_scenario(seed, geom, cfg.arrival_low, cfg.arrival_high, p);
}

DualEngine parse_engine(const std::string& s) {
  if (s == "ellipsoid") return DualEngine::Ellipsoid;
  if (s == "fast") return DualEngine::Fast;
  return DualEngine::Auto;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint wireless-power-transfer and edge-offload scheduling"};
  app.require_subcommand(1);

  InstanceArgs ia;
  int window = 2;
  bool carry = false;
  std::string scheme = "myopic";
  int trials_override = -1;
  long seed_override = -1;
  std::string out_override;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ia.config_path, "JSON config")->required();
    sub->add_option("--seed", ia.seed, "scenario seed");
    sub->add_option("--out", ia.out, "output path");
    sub->add_option("--engine", ia.engine, "dual engine: auto|ellipsoid|fast");
  };

  CLI::App* off = app.add_subcommand("solve-offline", "solve one instance with full TSI/CSI");
  add_common(off);

  CLI::App* onl = app.add_subcommand("solve-online", "sliding-window online solve");
  add_common(onl);
  onl->add_option("--window", window, "sliding-window size M");
  onl->add_flag("--carry", carry, "carry surplus harvested energy across windows");

  CLI::App* base = app.add_subcommand("solve-baseline", "benchmark scheme solve");
  add_common(base);
  base->add_option("--scheme", scheme, "local|full|myopic")->required();

  CLI::App* exp = app.add_subcommand("experiment", "run an experiment family");
  exp->add_option("--config", ia.config_path, "JSON experiment config")->required();
  exp->add_option("--trials", trials_override, "override trial count");
  exp->add_option("--seed", seed_override, "override base seed");
  exp->add_option("--out", out_override, "override output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (off->parsed() || onl->parsed() || base->parsed()) {
      ExperimentConfig cfg = load_config(ia.config_path);
      SystemParams p;
      Scenario scen = build_instance(cfg, ia.seed, &p);
      OfflineOptions opts;
      opts.engine = parse_engine(ia.engine);

      if (off->parsed()) {
        OfflineSolution sol = solve_offline(scen, p, opts);
        std::printf("objective_J %.9g\ndual_value_J %.9g\ngap_J %.9g\nfeasible %d\n",
                    sol.objective, sol.dual_value, sol.duality_gap,
                    sol.feasibility.feasible ? 1 : 0);
        if (!ia.out.empty()) write_file(ia.out, solution_to_json(sol));
        return sol.converged ? 0 : 2;
      }
      if (base->parsed()) {
        OfflineSolution sol;
        if (scheme == "local")
          sol = solve_local_only(scen, p, opts);
        else if (scheme == "full")
          sol = solve_full_offload(scen, p, opts);
        else if (scheme == "myopic")
          sol = solve_myopic(scen, p);
        else
          throw std::runtime_error("unknown baseline scheme: " + scheme);
        std::printf("objective_J %.9g\nfeasible %d\n", sol.objective,
                    sol.feasibility.feasible ? 1 : 0);
        if (!ia.out.empty()) write_file(ia.out, solution_to_json(sol));
        return sol.converged ? 0 : 2;
      }
      // online
      ChannelGeometry geom = ChannelGeometry::uniform(cfg.num_users, cfg.distance,
                                                      cfg.pathloss_exponent, cfg.omega0_db,
                                                      cfg.rician);
      PredictionErrorModel err{cfg.sigma_A, cfg.sigma_h, cfg.sigma_g};
      PredictedScenario pred =
          gen_predictions(scen, err, geom, splitmix64(ia.seed ^ 0xABCDEF0123456789ULL));
      OnlineOptions oo;
      oo.window = window;
      oo.inner = opts;
      oo.energy_carry = carry;
      OnlineResult res = solve_sliding_window(scen, pred, window, p, oo);
      std::printf("realized_objective_J %.9g\nconverged %d\n", res.realized_objective,
                  res.converged ? 1 : 0);
      if (!ia.out.empty()) write_file(ia.out, slot_log_csv(res.logs));
      return res.converged ? 0 : 2;
    }

    // experiment
    ExperimentConfig cfg = load_config(ia.config_path);
    if (trials_override > 0) cfg.trials = trials_override;
    if (seed_override >= 0) cfg.base_seed = static_cast<uint64_t>(seed_override);
    if (!out_override.empty()) cfg.out = out_override;
    ResultTable table = run_experiment(cfg);
    emit_csv(table, cfg.out);
    emit_plot_data(table, cfg.out);
    std::printf("wrote %s (%zu rows, %ld failures)\n", cfg.out.c_str(), table.rows.size(),
                table.failures);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
