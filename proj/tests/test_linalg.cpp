#include "doctest.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "cospadi/error.hpp"
#include "cospadi/linalg.hpp"
#include "test_util.hpp"

using namespace cospadi;
using namespace cospadi::linalg;

namespace {

DenseMatrix reconstruct(const ThinSvd& s) {
  DenseMatrix us = s.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= s.singular_values[j];
  return matmul(us, s.vt);
}

double orthonormality_error(const DenseMatrix& q) {
  return (matmul_tn(q, q) - DenseMatrix::identity(q.cols())).max_abs();
}

// Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric solution
// of the characteristic cubic), descending.
std::array<double, 3> symmetric3_eigenvalues(const DenseMatrix& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
  const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                    (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  DenseMatrix b = a;
  for (std::size_t i = 0; i < 3; ++i) b(i, i) -= q;
  b *= 1.0 / p;
  const double det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                     b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                     b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  const double e2 = 3.0 * q - e1 - e3;
  return {e1, e2, e3};
}

}  // namespace

TEST_CASE("qr of identity and scaled identity") {
  auto f = qr_factor(DenseMatrix::identity(4));
  CHECK(testutil::max_abs_diff(f.q, DenseMatrix::identity(4)) < 1e-15);
  CHECK(testutil::max_abs_diff(f.r, DenseMatrix::identity(4)) < 1e-15);
  f = qr_factor(DenseMatrix::identity(4) * 2.0);
  CHECK(testutil::max_abs_diff(f.q, DenseMatrix::identity(4)) < 1e-15);
  CHECK(testutil::max_abs_diff(f.r, DenseMatrix::identity(4) * 2.0) < 1e-15);
}

TEST_CASE("qr residuals on a random tall matrix") {
  std::mt19937_64 rng(11);
  const auto x = testutil::gaussian(64, 8, rng);
  const auto f = qr_factor(x);
  CHECK(orthonormality_error(f.q) < 1e-10);
  CHECK(testutil::rel_diff(matmul(f.q, f.r), x) < 1e-10);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(f.r(i, i) >= 0.0);
    for (std::size_t j = 0; j < i; ++j) CHECK(f.r(i, j) == 0.0);
  }
}

TEST_CASE("qr errors") {
  std::mt19937_64 rng(12);
  auto x = testutil::gaussian(10, 4, rng);
  for (std::size_t i = 0; i < 10; ++i) x(i, 2) = x(i, 0);
  try {
    qr_factor(x);
    FAIL("expected RankDeficient");
  } catch (const RankDeficient& e) {
    CHECK(e.column() == 2);
  }
  CHECK_THROWS_AS(qr_factor(testutil::gaussian(3, 5, rng)), ShapeError);
}

TEST_CASE("cholesky examples") {
  CHECK(testutil::max_abs_diff(cholesky(DenseMatrix::identity(3) * 4.0), DenseMatrix::identity(3) * 2.0) < 1e-15);
  CHECK(testutil::max_abs_diff(cholesky(DenseMatrix{{1, 0}, {0, 9}}), DenseMatrix{{1, 0}, {0, 3}}) < 1e-15);
  std::mt19937_64 rng(13);
  const auto x = testutil::gaussian(32, 6, rng);
  const auto g = gram(x);
  const auto c = cholesky(g);
  CHECK(testutil::rel_diff(matmul_tn(c, c), g) < 1e-9);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < i; ++j) CHECK(c(i, j) == 0.0);
}

TEST_CASE("cholesky errors") {
  CHECK_THROWS_AS(cholesky(DenseMatrix{{1, 0.5}, {0.4, 1}}), NotSymmetric);
  try {
    cholesky(DenseMatrix{{1, 0, 0}, {0, 1, 2}, {0, 2, 1}});
    FAIL("expected NotPositiveDefinite");
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.pivot() == 2);
  }
}

TEST_CASE("svd of a diagonal matrix") {
  const auto s = thin_svd(DenseMatrix{{3, 0, 0}, {0, 2, 0}, {0, 0, 1}});
  CHECK(s.singular_values == std::vector<double>{3, 2, 1});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(s.u(i, i)) == doctest::Approx(1.0));
    CHECK(std::abs(s.vt(i, i)) == doctest::Approx(1.0));
  }
}

TEST_CASE("svd of zero matrix completes orthonormal bases") {
  const auto s = thin_svd(DenseMatrix(4, 3));
  CHECK(s.singular_values == std::vector<double>{0, 0, 0});
  CHECK(orthonormality_error(s.u) < 1e-12);
  CHECK(orthonormality_error(s.vt.transpose()) < 1e-12);
}

TEST_CASE("svd reconstruction, orthonormality and ordering") {
  std::mt19937_64 rng(14);
  for (auto [m, n] : {std::pair{10, 7}, std::pair{7, 10}, std::pair{30, 30}, std::pair{1, 5}, std::pair{80, 3}}) {
    const auto a = testutil::gaussian(m, n, rng);
    const auto s = thin_svd(a);
    CHECK(testutil::rel_diff(reconstruct(s), a) < 1e-8);
    CHECK(orthonormality_error(s.u) < 1e-10);
    CHECK(orthonormality_error(s.vt.transpose()) < 1e-10);
    CHECK(std::is_sorted(s.singular_values.rbegin(), s.singular_values.rend()));
    CHECK(s.singular_values.back() >= 0.0);
    // sign convention: largest-magnitude entry of each left vector is positive
    for (std::size_t j = 0; j < s.u.cols(); ++j) {
      double best = 0.0;
      for (std::size_t i = 0; i < s.u.rows(); ++i)
        if (std::abs(s.u(i, j)) > std::abs(best)) best = s.u(i, j);
      CHECK(best > 0.0);
    }
  }
}

TEST_CASE("svd of rank-deficient input") {
  std::mt19937_64 rng(15);
  const auto a = matmul(testutil::gaussian(9, 2, rng), testutil::gaussian(2, 6, rng));
  const auto s = thin_svd(a);
  CHECK(s.singular_values[2] < 1e-12 * s.singular_values[0]);
  CHECK(testutil::rel_diff(reconstruct(s), a) < 1e-10);
  CHECK(orthonormality_error(s.u) < 1e-10);
}

TEST_CASE("svd matches the 3x3 characteristic-polynomial oracle") {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = testutil::gaussian(5, 3, rng);
    const auto eig = symmetric3_eigenvalues(gram(a));
    const auto s = thin_svd(a);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(s.singular_values[i] == doctest::Approx(std::sqrt(std::max(eig[i], 0.0))).epsilon(1e-6));
  }
}

TEST_CASE("svd is deterministic and permutation invariant") {
  std::mt19937_64 rng(17);
  const auto a = testutil::gaussian(9, 6, rng);
  const auto s1 = thin_svd(a);
  const auto s2 = thin_svd(a);
  CHECK(s1.u == s2.u);
  CHECK(s1.vt == s2.vt);
  CHECK(s1.singular_values == s2.singular_values);

  std::vector<std::size_t> cols{3, 0, 5, 1, 4, 2};
  DenseMatrix permuted = a.select_columns(cols);
  DenseMatrix flipped(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) flipped(i, j) = permuted(a.rows() - 1 - i, j);
  const auto sp = thin_svd(flipped);
  for (std::size_t i = 0; i < s1.singular_values.size(); ++i)
    CHECK(std::abs(sp.singular_values[i] - s1.singular_values[i]) < 1e-9);
}

TEST_CASE("truncated svd beats random rank-r matrices") {
  std::mt19937_64 rng(18);
  const auto a = testutil::gaussian(8, 12, rng);
  const auto s = thin_svd(a);
  for (std::size_t r = 1; r <= 7; ++r) {
    ThinSvd t{s.u.block(0, 0, 8, r), {s.singular_values.begin(), s.singular_values.begin() + r},
              s.vt.block(0, 0, r, 12)};
    const auto best = reconstruct(t);
    const double err = (a - best).frobenius_norm();
    for (int c = 0; c < 200; ++c) {
      auto p = matmul(testutil::gaussian(8, r, rng), testutil::gaussian(r, 12, rng));
      p *= best.frobenius_norm() / p.frobenius_norm();
      CHECK(err <= (a - p).frobenius_norm());
    }
  }
}

TEST_CASE("power iteration on exact rank-1 inputs") {
  DenseMatrix r(4, 4);
  r(0, 0) = 5.0;
  const auto t = rank1_svd_power(r, 1);
  CHECK(t.sigma == doctest::Approx(5.0));
  CHECK(std::abs(t.u[0]) == doctest::Approx(1.0));
  CHECK(std::abs(t.v[0]) == doctest::Approx(1.0));

  std::mt19937_64 rng(19);
  auto a = testutil::gaussian(6, 1, rng);
  auto b = testutil::gaussian(1, 9, rng);
  a *= 1.0 / a.frobenius_norm();
  b *= 7.0 / b.frobenius_norm();
  const auto t2 = rank1_svd_power(matmul(a, b), 3);
  CHECK(std::abs(t2.sigma - 7.0) < 1e-10);
  CHECK(norm2(t2.u) == doctest::Approx(1.0));
  CHECK(norm2(t2.v) == doctest::Approx(1.0));
}

TEST_CASE("power iteration converges to the leading singular value") {
  std::mt19937_64 rng(20);
  const auto r = testutil::gaussian(6, 9, rng);
  const auto t = rank1_svd_power(r, 50);
  CHECK(std::abs(t.sigma - thin_svd(r).singular_values[0]) < 1e-8 * t.sigma);

  // Spectrum with σ1/σ2 = 2: eight iterations suffice for 1e-4.
  for (int trial = 0; trial < 10; ++trial) {
    const auto u = orthonormalize_columns(testutil::gaussian(7, 4, rng));
    const auto v = orthonormalize_columns(testutil::gaussian(10, 4, rng));
    DenseMatrix us = u;
    const double sig[4] = {4.0, 2.0, 1.0, 0.5};
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 4; ++j) us(i, j) *= sig[j];
    const auto m = matmul(us, v.transpose());
    const auto p = rank1_svd_power(m, 8);
    CHECK(std::abs(p.sigma - 4.0) / 4.0 < 1e-4);
  }
  CHECK_THROWS_AS(rank1_svd_power(DenseMatrix(3, 3), 8), ZeroResidual);
  CHECK_THROWS_AS(rank1_svd_power(r, 0), InvalidConfig);
}

TEST_CASE("triangular solves") {
  std::mt19937_64 rng(21);
  const auto b = testutil::gaussian(3, 2, rng);
  CHECK(solve_triangular(DenseMatrix::identity(3), b, Triangle::upper) == b);
  CHECK(testutil::max_abs_diff(solve_triangular(DenseMatrix{{2, 0}, {0, 4}}, DenseMatrix{{2}, {8}}, Triangle::lower),
                               DenseMatrix{{1}, {2}}) < 1e-15);

  auto upper = testutil::gaussian(8, 8, rng);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < i; ++j) upper(i, j) = 0.0;
    upper(i, i) = 3.0 + std::abs(upper(i, i));
  }
  const auto rhs = testutil::gaussian(8, 5, rng);
  const auto xu = solve_triangular(upper, rhs, Triangle::upper);
  CHECK(testutil::rel_diff(matmul(upper, xu), rhs) < 1e-10);
  const auto lower = upper.transpose();
  const auto xl = solve_triangular(lower, rhs, Triangle::lower);
  CHECK(testutil::rel_diff(matmul(lower, xl), rhs) < 1e-10);

  const auto left = testutil::gaussian(6, 8, rng);
  const auto xr = solve_triangular_right(left, upper, Triangle::upper);
  CHECK(testutil::rel_diff(matmul(xr, upper), left) < 1e-10);

  DenseMatrix singular = upper;
  singular(4, 4) = 0.0;
  try {
    solve_triangular(singular, rhs, Triangle::upper);
    FAIL("expected SingularTriangular");
  } catch (const SingularTriangular& e) {
    CHECK(e.index() == 4);
  }
}
