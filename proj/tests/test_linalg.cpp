// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "wpmec/linalg.hpp"
#include "wpmec/rng.hpp"

using namespace wpmec;

namespace {

CMat random_hermitian(int n, uint64_t seed) {
  Substream rs(seed);
  CMat m(n, n);
  for (int c = 0; c < n; ++c) {
    m(c, c) = 4.0 * rs.normal();
    for (int r = 0; r < c; ++r) {
      const cxd z = rs.cnormal();
      m(r, c) = z;
      m(c, r) = std::conj(z);
    }
  }
  return m;
}

}  // namespace

TEST_SUITE("linalg") {

TEST_CASE("identity eigenvalues are all one") {
  EigResult e = hermitian_eig(CMat::identity(5));
  for (double v : e.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rank-one h h^H spectrum") {
  Substream rs(7);
  const int n = 4;
  std::vector<cxd> h(n);
  for (cxd& z : h) z = rs.cnormal();
  CMat m(n, n);
  m.add_rank1(h, 1.0);
  EigResult e = hermitian_eig(m);
  const double n2 = norm2(h);
  for (int i = 0; i < n - 1; ++i) CHECK(std::abs(e.values[i]) <= 1e-12 * n2);
  CHECK(e.values[n - 1] == doctest::Approx(n2).epsilon(1e-10));
  // top eigenvector parallel to h
  std::vector<cxd> top(n);
  for (int i = 0; i < n; ++i) top[i] = e.vectors(i, n - 1);
  const double align = std::abs(dot_conj(top, h));
  CHECK(align == doctest::Approx(std::sqrt(n2)).epsilon(1e-9));
}

TEST_CASE("reconstruction residual on random Hermitian matrices") {
  for (uint64_t seed = 1; seed <= 8; ++seed) {
    const int n = 2 + static_cast<int>(seed % 7);
    CMat m = random_hermitian(n, seed);
    EigResult e = hermitian_eig(m);
    // residual ||M V - V diag|| and unitarity of V
    double resid = 0.0;
    std::vector<cxd> col(n), mv(n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) col[i] = e.vectors(i, j);
      matvec(m, col, mv);
      for (int i = 0; i < n; ++i) resid = std::max(resid, std::abs(mv[i] - e.values[j] * col[i]));
    }
    CHECK(resid <= 1e-10 * std::max(1.0, m.frob_norm()));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        std::vector<cxd> va(n), vb(n);
        for (int i = 0; i < n; ++i) {
          va[i] = e.vectors(i, a);
          vb[i] = e.vectors(i, b);
        }
        const double want = a == b ? 1.0 : 0.0;
        CHECK(std::abs(dot_conj(va, vb) - cxd(want, 0)) <= 1e-10);
      }
  }
}

TEST_CASE("non-Hermitian input is rejected") {
  CMat m(2, 2);
  m(0, 1) = cxd(1.0, 0.0);
  m(1, 0) = cxd(0.5, 0.0);
  CHECK_THROWS_AS(hermitian_eig(m), std::invalid_argument);
}

TEST_CASE("cholesky solves positive definite systems") {
  for (uint64_t seed = 11; seed <= 14; ++seed) {
    const int n = 4;
    CMat m = random_hermitian(n, seed);
    CMat spd(n, n);
    // A = M M^H + I is Hermitian PD
    for (int i = 0; i < n; ++i) spd(i, i) = 1.0;
    for (int c = 0; c < n; ++c)
      for (int r = 0; r < n; ++r) {
        cxd acc(0.0);
        for (int k = 0; k < n; ++k) acc += m(r, k) * std::conj(m(c, k));
        spd(r, c) += acc;
      }
    Substream rs(seed * 31);
    std::vector<cxd> b(n), x(n), ax(n);
    for (cxd& z : b) z = rs.cnormal();
    CMat l = spd;
    REQUIRE(cholesky(l));
    x = b;
    cholesky_solve(l, x);
    matvec(spd, x, ax);
    for (int i = 0; i < n; ++i) CHECK(std::abs(ax[i] - b[i]) <= 1e-9);
  }
}

}  // TEST_SUITE
