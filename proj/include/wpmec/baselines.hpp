// SPDX-License-Identifier: Apache-2.0
//
// Benchmark schemes: per-slot myopic design (each slot's arrivals fully
// dispatched within the slot, offload split by the univariate first-order
// condition), local-computing-only, and full-offloading.  The latter two run
// through the same dual machinery with the corresponding variables disabled.

#ifndef WPMEC_BASELINES_HPP
#define WPMEC_BASELINES_HPP

#include "wpmec/offline.hpp"

namespace wpmec {

enum class BaselineKind { LocalOnly, FullOffload, Myopic };

// Minimizes  zeta C^3 (A-l)^3/tau^2 + tau sigma^2 (2^{l/(tau B)}-1)/g2  over
// l in [0, A]; returns (l_off, l_loc).
std::pair<double, double> myopic_offload_split(double arrival, double g_gain, double zeta,
                                               double cycles_per_bit, const SystemParams& p);

OfflineSolution solve_myopic(const Scenario& scen, const SystemParams& p,
                             double wpt_tol = 1e-6);
OfflineSolution solve_local_only(const Scenario& scen, const SystemParams& p,
                                 const OfflineOptions& opts = {});
OfflineSolution solve_full_offload(const Scenario& scen, const SystemParams& p,
                                   const OfflineOptions& opts = {});

}  // namespace wpmec

#endif  // WPMEC_BASELINES_HPP
