// SPDX-License-Identifier: Apache-2.0
//
// Batch experiment runner: generates randomized scenarios, runs the selected
// schemes over a parameter sweep with a bounded worker pool, and aggregates
// per-slot average AP energies into CSV tables.  Per-trial seeds derive from
// the base seed, and results merge in trial order, so outputs are identical
// regardless of thread count.

#ifndef WPMEC_HARNESS_HPP
#define WPMEC_HARNESS_HPP

#include <string>

#include "wpmec/online.hpp"

namespace wpmec {

enum class ExperimentFamily {
  Fig2Trace,
  Fig3VsAmean,
  Fig4VsN,
  Fig5OnlineVsN,
  Fig6VsM,
  Fig7VsSigma
};

enum class Scheme {
  Offline,
  LocalOnly,
  FullOffload,
  Myopic,
  Online,
  OnlineLocalOnly,
  OnlineFullOffload,
  OnlineMyopic
};

std::string to_string(ExperimentFamily f);
std::string to_string(Scheme s);
ExperimentFamily family_from_string(const std::string& s);
Scheme scheme_from_string(const std::string& s);

struct ExperimentConfig {
  ExperimentFamily family = ExperimentFamily::Fig3VsAmean;
  std::vector<double> sweep;  // meaning depends on the family
  int trials = 100;
  uint64_t base_seed = 1;

  // System template (num_slots/users may be overridden by the sweep).
  int num_users = 4, num_slots = 10, num_antennas = 4;
  double slot_duration = 0.02, bandwidth = 2e6, noise_power = 1e-9;
  double eta = 0.3, zeta_user = 1e-28, zeta_ap = 1e-29;
  double cycles_user = 1e3, cycles_ap = 1e3;
  double distance = 4.0, pathloss_exponent = 3.0, omega0_db = -32.0, rician = 3.0;
  double arrival_low = 5e5, arrival_high = 1e6;
  double sigma_A = 0.2, sigma_h = 0.2, sigma_g = 0.2;
  std::string sigma_axis = "A";  // fig7: which error the sweep varies (A|h|g)

  std::vector<Scheme> schemes;
  int window = 2;
  DualEngine engine = DualEngine::Auto;
  bool energy_carry = false;
  double trial_time_cap_s = 0.0;  // 0 = unlimited
  int threads = 0;                // 0 = hardware concurrency
  std::string out = "results.csv";

  void validate() const;
};

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

struct ResultRow {
  double sweep = 0.0;
  std::string scheme;
  double mean_energy = 0.0;  // per-slot AP energy [J]
  double stderr_mean = 0.0;
  int trials = 0;
  double runtime_s = 0.0;  // mean per trial
};

struct ResultTable {
  std::vector<ResultRow> rows;
  long failures = 0;  // trials excluded (solver failure / time cap / audit)
};

ResultTable run_experiment(const ExperimentConfig& cfg);

void emit_csv(const ResultTable& table, const std::string& path);
void emit_plot_data(const ResultTable& table, const std::string& path);

}  // namespace wpmec

#endif  // WPMEC_HARNESS_HPP
