// SPDX-License-Identifier: Apache-2.0

#include "wpmec/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace wpmec {

SystemParams SystemParams::uniform(int K, int N, int Nt, double tau, double B, double sigma2,
                                   double eta, double zeta_user, double zeta_ap, double C_user,
                                   double C_ap) {
  SystemParams p;
  p.num_users = K;
  p.num_slots = N;
  p.num_antennas = Nt;
  p.slot_duration = tau;
  p.bandwidth = B;
  p.noise_power = sigma2;
  p.snr_penalty = 1.0;
  p.harvest_efficiency.assign(K, eta);
  p.user_capacitance.assign(K, zeta_user);
  p.ap_capacitance = zeta_ap;
  p.user_cycles_per_bit.assign(K, C_user);
  p.ap_cycles_per_bit = C_ap;
  p.validate();
  return p;
}

void SystemParams::validate() const {
  auto req = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("SystemParams: ") + what);
  };
  req(num_users > 0, "num_users must be positive");
  req(num_slots > 0, "num_slots must be positive");
  req(num_antennas > 0, "num_antennas must be positive");
  req(slot_duration > 0.0, "slot_duration must be positive");
  req(bandwidth > 0.0, "bandwidth must be positive");
  req(noise_power > 0.0, "noise_power must be positive");
  req(snr_penalty == 1.0, "snr_penalty is fixed to 1");
  req(static_cast<int>(harvest_efficiency.size()) == num_users, "harvest_efficiency size");
  req(static_cast<int>(user_capacitance.size()) == num_users, "user_capacitance size");
  req(static_cast<int>(user_cycles_per_bit.size()) == num_users, "user_cycles_per_bit size");
  req(ap_capacitance > 0.0, "ap_capacitance must be positive");
  req(ap_cycles_per_bit > 0.0, "ap_cycles_per_bit must be positive");
  for (int k = 0; k < num_users; ++k) {
    req(harvest_efficiency[k] > 0.0 && harvest_efficiency[k] <= 1.0,
        "harvest_efficiency must lie in (0,1]");
    req(user_capacitance[k] > 0.0, "user_capacitance must be positive");
    req(user_cycles_per_bit[k] > 0.0, "user_cycles_per_bit must be positive");
  }
}

Scenario Scenario::empty(int K, int N, int Nt) {
  Scenario s;
  s.K = K;
  s.N = N;
  s.Nt = Nt;
  s.arrivals.assign(static_cast<size_t>(K) * N, 0.0);
  s.wpt_channels.assign(static_cast<size_t>(K) * N * Nt, cxd(0.0));
  s.offload_channels.assign(static_cast<size_t>(K) * N * Nt, cxd(0.0));
  return s;
}

double Scenario::total_arrivals() const {
  double t = 0.0;
  for (double a : arrivals) t += a;
  return t;
}

void Scenario::validate(const SystemParams& p) const {
  if (K != p.num_users || N != p.num_slots || Nt != p.num_antennas)
    throw std::invalid_argument("Scenario: dimensions do not match SystemParams");
  for (double a : arrivals)
    if (!(a >= 0.0)) throw std::invalid_argument("Scenario: negative arrival");
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < N; ++i)
      if (g_gain(k, i) <= 0.0 || h_gain(k, i) <= 0.0)
        throw std::invalid_argument("Scenario: zero channel vector");
}

Allocation Allocation::zero(int K, int N, int Nt) {
  Allocation a;
  a.K = K;
  a.N = N;
  a.Nt = Nt;
  a.covariances.assign(static_cast<size_t>(N) * Nt * Nt, cxd(0.0));
  a.mec_bits.assign(N, 0.0);
  a.local_bits.assign(static_cast<size_t>(K) * N, 0.0);
  a.offload_bits.assign(static_cast<size_t>(K) * N, 0.0);
  return a;
}

CMat Allocation::covariance(int i) const {
  CMat s(Nt, Nt);
  const cxd* base = covariances.data() + static_cast<size_t>(i) * Nt * Nt;
  std::copy(base, base + static_cast<size_t>(Nt) * Nt, s.data());
  return s;
}

void Allocation::set_covariance(int i, const CMat& s) {
  std::copy(s.data(), s.data() + static_cast<size_t>(Nt) * Nt,
            covariances.data() + static_cast<size_t>(i) * Nt * Nt);
}

void Allocation::validate_structure() const {
  if (mec_bits.empty() || mec_bits[0] != 0.0)
    throw std::invalid_argument("Allocation: l_mec at the first slot must be exactly 0");
  for (int k = 0; k < K; ++k)
    if (offload(k, N - 1) != 0.0)
      throw std::invalid_argument("Allocation: l_off at the last slot must be exactly 0");
  for (double v : mec_bits)
    if (!(v >= 0.0)) throw std::invalid_argument("Allocation: negative mec bits");
  for (double v : local_bits)
    if (!(v >= 0.0)) throw std::invalid_argument("Allocation: negative local bits");
  for (double v : offload_bits)
    if (!(v >= 0.0)) throw std::invalid_argument("Allocation: negative offload bits");
  for (int i = 0; i < N; ++i) {
    const CMat s = covariance(i);
    const double scale = std::max(s.frob_norm(), 1e-300);
    if (s.hermitian_asymmetry() > 1e-12 * scale)
      throw std::invalid_argument("Allocation: covariance not Hermitian");
  }
}

FeasibilityTolerances FeasibilityTolerances::scaled(const Scenario& scen, const SystemParams& p,
                                                    double rel) {
  FeasibilityTolerances t;
  const double total_bits = std::max(1.0, scen.total_arrivals());
  t.bits = rel * total_bits;
  // Energy scale: local-computing everything on arrival, a crude but always
  // valid upper bound on per-user consumption.
  double e = 1.0;
  for (int k = 0; k < scen.K; ++k)
    for (int i = 0; i < scen.N; ++i)
      e += local_energy(scen.arrival(k, i), p.user_capacitance[k], p.user_cycles_per_bit[k],
                        p.slot_duration);
  t.energy = rel * e;
  t.nonnegativity = rel * total_bits * 1e-3;
  t.psd = 1e-9;
  return t;
}

std::string FeasibilityReport::summary() const {
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "feasible=%d energy=%.3e user_caus=%.3e user_dead=%.3e ap_caus=%.3e "
                "ap_dead=%.3e nonneg=%.3e psd=%.3e",
                feasible ? 1 : 0, energy_harvesting, user_task_causality, user_deadline,
                ap_task_causality, ap_deadline, nonnegativity, psd);
  return buf;
}

double exp2_clamped(double x) { return std::exp2(std::min(x, 1020.0)); }

double local_energy(double l_bits, double zeta, double cycles_per_bit, double tau) {
  if (l_bits < 0.0) throw std::domain_error("local_energy: negative bits");
  const double c = cycles_per_bit;
  return zeta * c * c * c * l_bits * l_bits * l_bits / (tau * tau);
}

double offload_energy_gain(double l_bits, double g_gain, double sigma2, double bandwidth,
                           double tau) {
  if (l_bits < 0.0) throw std::domain_error("offload_energy: negative bits");
  if (!(g_gain > 0.0)) throw std::domain_error("offload_energy: zero channel");
  if (l_bits == 0.0) return 0.0;
  return tau * sigma2 * (exp2_clamped(l_bits / (tau * bandwidth)) - 1.0) / g_gain;
}

double offload_energy(double l_bits, std::span<const cxd> g, double sigma2, double bandwidth,
                      double tau) {
  return offload_energy_gain(l_bits, norm2(g), sigma2, bandwidth, tau);
}

double harvested_energy(const CMat& s, std::span<const cxd> h, double eta, double tau) {
  const double scale = std::max(s.frob_norm(), 1e-300);
  if (s.hermitian_asymmetry() > 1e-10 * scale)
    throw std::domain_error("harvested_energy: covariance not Hermitian");
  return tau * eta * quad_form(s, h);
}

double mec_energy(double l_bits, double zeta0, double cycles_per_bit0, double tau) {
  return local_energy(l_bits, zeta0, cycles_per_bit0, tau);
}

double total_objective(const Allocation& alloc, const SystemParams& p) {
  if (alloc.K != p.num_users || alloc.N != p.num_slots || alloc.Nt != p.num_antennas)
    throw std::invalid_argument("total_objective: dimension mismatch");
  double obj = 0.0;
  for (int i = 0; i < alloc.N; ++i) obj += p.slot_duration * alloc.covariance(i).trace_real();
  for (int i = 1; i < alloc.N; ++i)
    obj += mec_energy(alloc.mec_bits[i], p.ap_capacitance, p.ap_cycles_per_bit, p.slot_duration);
  return obj;
}

FeasibilityReport check_feasibility(const Allocation& alloc, const Scenario& scen,
                                    const SystemParams& p, const FeasibilityTolerances& tol) {
  const int K = scen.K, N = scen.N;
  FeasibilityReport r;

  // Nonnegativity and structural zeros.
  double neg = 0.0;
  for (double v : alloc.local_bits) neg = std::max(neg, -v);
  for (double v : alloc.offload_bits) neg = std::max(neg, -v);
  for (double v : alloc.mec_bits) neg = std::max(neg, -v);
  neg = std::max(neg, std::abs(alloc.mec_bits[0]));
  for (int k = 0; k < K; ++k) neg = std::max(neg, std::abs(alloc.offload(k, N - 1)));
  r.nonnegativity = neg;

  // PSD of covariances; eigenvalue deficit measured relative to the trace so
  // the check is meaningful across the huge power ranges that occur here.
  for (int i = 0; i < N; ++i) {
    CMat s = alloc.covariance(i);
    s.symmetrize_hermitian();
    const double scale = std::max(1.0, s.trace_real());
    r.psd = std::max(r.psd, -min_eig(s) / scale);
  }

  // Per-user energy causality (10b) and task constraints (10c)/(10d).
  for (int k = 0; k < K; ++k) {
    double cum_cons = 0.0, cum_harv = 0.0, cum_arr = 0.0, cum_exec = 0.0;
    for (int i = 0; i < N; ++i) {
      const double lloc = std::max(0.0, alloc.local(k, i));
      const double loff = std::max(0.0, alloc.offload(k, i));
      cum_cons += local_energy(lloc, p.user_capacitance[k], p.user_cycles_per_bit[k],
                               p.slot_duration) +
                  offload_energy_gain(loff, scen.g_gain(k, i), p.noise_power, p.bandwidth,
                                      p.slot_duration);
      cum_harv += harvested_energy(alloc.covariance(i), scen.h(k, i), p.harvest_efficiency[k],
                                   p.slot_duration);
      r.energy_harvesting = std::max(r.energy_harvesting, cum_cons - cum_harv);

      cum_arr += scen.arrival(k, i);
      // The deadline (last slot) counts offloads only through slot N-1.
      cum_exec += (i < N - 1) ? lloc + loff : lloc;
      if (i < N - 1)
        r.user_task_causality = std::max(r.user_task_causality, cum_exec - cum_arr);
      else
        r.user_deadline = std::max(r.user_deadline, std::abs(cum_arr - cum_exec));
    }
  }

  // AP task causality (10e) and deadline (10f).
  double cum_off = 0.0, cum_mec = 0.0;
  for (int i = 0; i < N; ++i) {
    if (i >= 1) {
      cum_mec += std::max(0.0, alloc.mec_bits[i]);
      // offloads available: slots 0..i-1
      if (i < N - 1)
        r.ap_task_causality = std::max(r.ap_task_causality, cum_mec - cum_off);
      else
        r.ap_deadline = std::abs(cum_off - cum_mec);
    }
    for (int k = 0; k < K; ++k) cum_off += std::max(0.0, alloc.offload(k, i));
  }

  r.feasible = r.energy_harvesting <= tol.energy && r.user_task_causality <= tol.bits &&
               r.user_deadline <= tol.bits && r.ap_task_causality <= tol.bits &&
               r.ap_deadline <= tol.bits && r.nonnegativity <= tol.nonnegativity + 1e-300 &&
               r.psd <= tol.psd;
  return r;
}

}  // namespace wpmec
