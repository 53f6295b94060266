// SPDX-License-Identifier: Apache-2.0
//
// Small dense complex-Hermitian linear algebra used throughout the solver:
// column-major matrices up to ~16x16, cyclic-Jacobi eigendecomposition,
// Cholesky factorization/solves.  Sizes here are tiny (antennas, users), so
// simple O(n^3) kernels beat any library dispatch overhead.

#ifndef WPMEC_LINALG_HPP
#define WPMEC_LINALG_HPP

#include <complex>
#include <span>
#include <vector>

namespace wpmec {

using cxd = std::complex<double>;

// Column-major dense complex matrix.
class CMat {
 public:
  CMat() = default;
  CMat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols) {}

  static CMat identity(int n);
  static CMat zero(int n) { return CMat(n, n); }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  cxd& operator()(int r, int c) { return a_[static_cast<size_t>(c) * rows_ + r]; }
  const cxd& operator()(int r, int c) const { return a_[static_cast<size_t>(c) * rows_ + r]; }

  cxd* data() { return a_.data(); }
  const cxd* data() const { return a_.data(); }

  // A += w * v v^H (Hermitian rank-one update), v of length rows().
  void add_rank1(std::span<const cxd> v, double w);

  double trace_real() const;
  double frob_norm() const;
  // max |A(i,j) - conj(A(j,i))| over all pairs.
  double hermitian_asymmetry() const;
  void symmetrize_hermitian();  // A <- (A + A^H)/2, real diagonal

  CMat& operator+=(const CMat& other);
  CMat& operator*=(double s);

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<cxd> a_;
};

// y = A x
void matvec(const CMat& a, std::span<const cxd> x, std::span<cxd> y);

// v^H A v, real part (exact for Hermitian A).
double quad_form(const CMat& a, std::span<const cxd> v);

cxd dot_conj(std::span<const cxd> x, std::span<const cxd> y);  // x^H y
double norm2(std::span<const cxd> x);                          // ||x||^2

// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
// Returns eigenvalues ascending; V's columns are the matching orthonormal
// eigenvectors (M V = V diag(w)).  Throws std::invalid_argument when the
// input is not Hermitian within `herm_tol` relative to its norm.
struct EigResult {
  std::vector<double> values;  // ascending
  CMat vectors;                // columns
};
EigResult hermitian_eig(const CMat& m, double herm_tol = 1e-10);

// Smallest eigenvalue and its eigenvector (convenience wrapper).
double min_eig(const CMat& m, std::vector<cxd>* vec = nullptr);
double max_eig(const CMat& m);

// In-place lower Cholesky of a Hermitian positive definite matrix.
// Returns false when a pivot drops below `tiny` (not PD).
bool cholesky(CMat& a, double tiny = 0.0);
// Solve L L^H x = b given the factor from cholesky(); b overwritten by x.
void cholesky_solve(const CMat& l, std::span<cxd> b);

}  // namespace wpmec

#endif  // WPMEC_LINALG_HPP
