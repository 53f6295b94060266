// SPDX-License-Identifier: Apache-2.0
//
// End-to-end solver for one horizon block: dual maximization, closed-form
// bit recovery at the dual optimum, a monotonicity-preserving feasibility
// repair, and covariance recovery through the minimum-power beamforming
// solver.  The full-horizon entry point is solve_offline(); the same block
// solver also backs the sliding-window scheme and the restricted baselines.

#ifndef WPMEC_OFFLINE_HPP
#define WPMEC_OFFLINE_HPP

#include <string>

#include "wpmec/dual.hpp"
#include "wpmec/model.hpp"
#include "wpmec/wpt.hpp"

namespace wpmec {

enum class DualEngine { Auto, Ellipsoid, Fast };

struct OfflineOptions {
  DualEngine engine = DualEngine::Auto;
  double eps_rel = 1e-4;   // dual accuracy relative to a crude upper bound
  double eps_abs = 0.0;    // absolute override [J]
  double wpt_tol = 1e-6;   // beamforming duality-gap tolerance (relative)
  long max_iterations = 0;  // ellipsoid cap; 0 = auto
  double initial_radius = 0.0;
  int fast_iters = 400;
  int auto_fast_threshold = 96;  // ellipsoid when dual dimension <= this
  int log_every = 0;
  double eps_lambda_rel = 1e-10;
};

// Primal solution of a generalized block (offline horizon or one window).
struct BlockSolution {
  BitCandidates bits;           // repaired, feasible bit allocation
  std::vector<cxd> covariances;  // T*Nt*Nt
  double objective = 0.0;       // block objective [J]
  double dual_value = 0.0;      // valid lower bound
  double gap = 0.0;
  bool converged = false;
  long dual_iterations = 0;
  DualVariables dual;
  WptSolution wpt;
};

BlockSolution solve_block(const DualProblem& dp, const OfflineOptions& opts);

struct MonotonicityReport {
  bool ok = true;
  int user = -1;   // -1 for the MEC sequence
  int slot = -1;   // first violating transition (0-based, later slot)
  double amount = 0.0;
};

struct OfflineSolution {
  Allocation allocation;
  double objective = 0.0;
  double dual_value = 0.0;
  double duality_gap = 0.0;
  DualVariables dual;
  FeasibilityReport feasibility;
  long dual_iterations = 0;
  bool converged = false;
};

OfflineSolution solve_offline(const Scenario& scen, const SystemParams& p,
                              const OfflineOptions& opts = {});

// Running argmax of the WPT channel gains, earliest slot wins ties.
std::vector<int> causality_dominating_slots(std::span<const double> h_gains);

// Single-user structural recovery: MRC beams at the dominating slots sized
// to the demand accumulated before the next dominating slot.
struct SingleUserWpt {
  std::vector<cxd> covariances;  // N*Nt*Nt
  std::vector<double> powers;    // per slot, nonzero only at dominating slots
};
SingleUserWpt recover_single_user_wpt(const std::vector<double>& l_loc,
                                      const std::vector<double>& l_off, const Scenario& scen,
                                      const SystemParams& p);

MonotonicityReport verify_monotonicity(const Allocation& alloc, double tol);

std::string solution_to_json(const OfflineSolution& sol);

}  // namespace wpmec

#endif  // WPMEC_OFFLINE_HPP
