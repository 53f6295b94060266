// SPDX-License-Identifier: Apache-2.0
//
// Sliding-window sequential scheme: at every slot a finite-horizon block is
// built from the current true TSI/CSI plus predictions for the remaining
// window slots, solved with the offline machinery, and only the first-slot
// decision is committed.  Residual bit backlogs (user and AP side) carry the
// state between slots; an optional energy-bank term carries surplus
// harvested energy (off by default -- window energy accounting restarts at
// the window start).

#ifndef WPMEC_ONLINE_HPP
#define WPMEC_ONLINE_HPP

#include "wpmec/offline.hpp"
#include "wpmec/scenario.hpp"

namespace wpmec {

enum class Restriction { None, LocalOnly, FullOffload };

struct OnlineOptions {
  int window = 1;             // M
  OfflineOptions inner;       // per-window solver options
  bool energy_carry = false;  // carry surplus harvested energy across windows
  Restriction restriction = Restriction::None;
};

struct OnlineState {
  int slot = 0;                       // next global slot to decide (0-based)
  std::vector<double> residual_user;  // R_k [bits]
  double residual_mec = 0.0;          // R^mec [bits]
  std::vector<double> energy_bank;    // realized surplus harvested energy [J]

  static OnlineState initial(int K) {
    OnlineState s;
    s.residual_user.assign(K, 0.0);
    s.energy_bank.assign(K, 0.0);
    return s;
  }
};

struct WindowProblem {
  int global_slot = 0;
  int m_eff = 0;
  DualProblem data;
};

WindowProblem build_window_problem(const OnlineState& state, const Scenario& scen_true,
                                   const PredictedScenario& pred, int window,
                                   const SystemParams& p, bool energy_carry,
                                   Restriction restriction = Restriction::None);

// First-slot decisions committed at one slot.
struct Commitment {
  std::vector<double> loc;  // K
  std::vector<double> off;  // K
  double mec = 0.0;
};

// Residual update per the backlog recursions; throws std::logic_error when a
// residual would go negative beyond tolerance.
OnlineState update_residuals(const OnlineState& state, const Commitment& committed,
                             std::span<const double> true_arrivals, double tol_bits);

struct SlotLog {
  int slot = 0;
  int m_eff = 0;
  double committed_loc = 0.0;  // summed over users
  double committed_off = 0.0;
  double committed_mec = 0.0;
  double slot_energy = 0.0;  // tau*tr(S) + E_mec at this slot
  double residual_user = 0.0;  // summed
  double residual_mec = 0.0;
  bool converged = true;
};
std::string slot_log_csv(const std::vector<SlotLog>& rows);

struct OnlineResult {
  Allocation trajectory;
  double realized_objective = 0.0;
  std::vector<SlotLog> logs;
  bool converged = true;
};

OnlineResult solve_sliding_window(const Scenario& scen_true, const PredictedScenario& pred,
                                  int window, const SystemParams& p,
                                  const OnlineOptions& opts);

}  // namespace wpmec

#endif  // WPMEC_ONLINE_HPP
