// SPDX-License-Identifier: Apache-2.0

#include "wpmec/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wpmec {

CMat CMat::identity(int n) {
  CMat m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void CMat::add_rank1(std::span<const cxd> v, double w) {
  const int n = rows_;
  for (int c = 0; c < n; ++c) {
    const cxd vc = std::conj(v[c]) * w;
    cxd* col = a_.data() + static_cast<size_t>(c) * n;
    for (int r = 0; r < n; ++r) col[r] += v[r] * vc;
  }
}

double CMat::trace_real() const {
  double t = 0.0;
  for (int i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i).real();
  return t;
}

double CMat::frob_norm() const {
  double s = 0.0;
  for (const cxd& z : a_) s += std::norm(z);
  return std::sqrt(s);
}

double CMat::hermitian_asymmetry() const {
  double worst = 0.0;
  for (int c = 0; c < cols_; ++c)
    for (int r = 0; r <= c; ++r)
      worst = std::max(worst, std::abs((*this)(r, c) - std::conj((*this)(c, r))));
  return worst;
}

void CMat::symmetrize_hermitian() {
  for (int c = 0; c < cols_; ++c) {
    for (int r = 0; r < c; ++r) {
      const cxd avg = 0.5 * ((*this)(r, c) + std::conj((*this)(c, r)));
      (*this)(r, c) = avg;
      (*this)(c, r) = std::conj(avg);
    }
    (*this)(c, c) = cxd((*this)(c, c).real(), 0.0);
  }
}

CMat& CMat::operator+=(const CMat& other) {
  for (size_t i = 0; i < a_.size(); ++i) a_[i] += other.a_[i];
  return *this;
}

CMat& CMat::operator*=(double s) {
  for (cxd& z : a_) z *= s;
  return *this;
}

void matvec(const CMat& a, std::span<const cxd> x, std::span<cxd> y) {
  const int m = a.rows(), n = a.cols();
  std::fill(y.begin(), y.end(), cxd(0.0));
  for (int c = 0; c < n; ++c) {
    const cxd xc = x[c];
    const cxd* col = a.data() + static_cast<size_t>(c) * m;
    for (int r = 0; r < m; ++r) y[r] += col[r] * xc;
  }
}

double quad_form(const CMat& a, std::span<const cxd> v) {
  const int n = a.rows();
  double acc = 0.0;
  for (int c = 0; c < n; ++c) {
    const cxd* col = a.data() + static_cast<size_t>(c) * n;
    cxd partial(0.0);
    for (int r = 0; r < n; ++r) partial += std::conj(v[r]) * col[r];
    acc += (partial * v[c]).real();
  }
  return acc;
}

cxd dot_conj(std::span<const cxd> x, std::span<const cxd> y) {
  cxd s(0.0);
  for (size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
  return s;
}

double norm2(std::span<const cxd> x) {
  double s = 0.0;
  for (const cxd& z : x) s += std::norm(z);
  return s;
}

EigResult hermitian_eig(const CMat& m, double herm_tol) {
  const int n = m.rows();
  if (n != m.cols()) throw std::invalid_argument("hermitian_eig: matrix not square");
  const double scale = std::max(m.frob_norm(), 1e-300);
  if (m.hermitian_asymmetry() > herm_tol * scale)
    throw std::invalid_argument("hermitian_eig: matrix not Hermitian");

  CMat a = m;
  a.symmetrize_hermitian();
  CMat v = CMat::identity(n);

  // Cyclic Jacobi with complex plane rotations.  Each rotation zeroes one
  // off-diagonal pair; convergence for n<=16 takes a handful of sweeps.
  const int max_sweeps = 60;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int q = 0; q < n; ++q)
      for (int p = 0; p < q; ++p) off += std::norm(a(p, q));
    if (std::sqrt(2.0 * off) <= 1e-15 * scale) break;

    for (int q = 1; q < n; ++q) {
      for (int p = 0; p < q; ++p) {
        const cxd apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag <= 1e-18 * scale) continue;
        const cxd phase = apq / mag;  // a(p,q) = mag * phase
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * mag);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        // U = P*R with P = diag(1, e^{-i phi}) and R = [[c, s], [-s, c]]:
        // columns u_p = [c, -s e^{-i phi}], u_q = [s, c e^{-i phi}].
        const cxd spc = s * std::conj(phase);  // s e^{-i phi}
        const cxd cpc = c * std::conj(phase);  // c e^{-i phi}
        for (int k = 0; k < n; ++k) {
          const cxd akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - spc * akq;
          a(k, q) = s * akp + cpc * akq;
        }
        for (int k = 0; k < n; ++k) {
          const cxd apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * phase * aqk;
          a(q, k) = s * apk + c * phase * aqk;
        }
        a(p, q) = cxd(0.0);
        a(q, p) = cxd(0.0);
        a(p, p) = cxd(a(p, p).real(), 0.0);
        a(q, q) = cxd(a(q, q).real(), 0.0);
        for (int k = 0; k < n; ++k) {
          const cxd vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - spc * vkq;
          v(k, q) = s * vkp + cpc * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = a(i, i).real();
  std::sort(order.begin(), order.end(), [&](int x, int y) { return diag[x] < diag[y]; });

  EigResult res;
  res.values.resize(n);
  res.vectors = CMat(n, n);
  for (int j = 0; j < n; ++j) {
    res.values[j] = diag[order[j]];
    for (int i = 0; i < n; ++i) res.vectors(i, j) = v(i, order[j]);
  }
  return res;
}

double min_eig(const CMat& m, std::vector<cxd>* vec) {
  EigResult e = hermitian_eig(m);
  if (vec) {
    vec->resize(m.rows());
    for (int i = 0; i < m.rows(); ++i) (*vec)[i] = e.vectors(i, 0);
  }
  return e.values.front();
}

double max_eig(const CMat& m) { return hermitian_eig(m).values.back(); }

bool cholesky(CMat& a, double tiny) {
  const int n = a.rows();
  for (int j = 0; j < n; ++j) {
    double d = a(j, j).real();
    for (int k = 0; k < j; ++k) d -= std::norm(a(j, k));
    if (!(d > tiny)) return false;
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      cxd s = a(i, j);
      for (int k = 0; k < j; ++k) s -= a(i, k) * std::conj(a(j, k));
      a(i, j) = s / ljj;
    }
    for (int i = 0; i < j; ++i) a(i, j) = cxd(0.0);
  }
  return true;
}

void cholesky_solve(const CMat& l, std::span<cxd> b) {
  const int n = l.rows();
  for (int i = 0; i < n; ++i) {
    cxd s = b[i];
    for (int k = 0; k < i; ++k) s -= l(i, k) * b[k];
    b[i] = s / l(i, i).real();
  }
  for (int i = n - 1; i >= 0; --i) {
    cxd s = b[i];
    for (int k = i + 1; k < n; ++k) s -= std::conj(l(k, i)) * b[k];
    b[i] = s / l(i, i).real();
  }
}

}  // namespace wpmec
