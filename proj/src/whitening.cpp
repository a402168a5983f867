#include "cospadi/whitening.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cospadi/error.hpp"
#include "cospadi/linalg.hpp"

namespace cospadi {

namespace {

// Cholesky pivots below this fraction of the largest Gram diagonal (in
// square-root terms) are treated as numerical rank deficiency.
constexpr double kCholeskyRankTol = 1e-7;

[[noreturn]] void throw_rank_deficient(std::size_t column) {
  throw RankDeficient(column, "fit_whitener: calibration matrix is rank deficient at column " +
                                  std::to_string(column) +
                                  "; retry with damping > 0 (e.g. --damping 1e-6)");
}

double mean_diagonal(const DenseMatrix& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) s += g(i, i);
  return g.rows() ? s / static_cast<double>(g.rows()) : 0.0;
}

}  // namespace

std::string_view to_string(WhitenMethod m) {
  return m == WhitenMethod::qr ? "qr" : "cholesky";
}

WhitenMethod parse_whiten_method(std::string_view s) {
  if (s == "qr") return WhitenMethod::qr;
  if (s == "cholesky") return WhitenMethod::cholesky;
  throw InvalidConfig("unknown whitening method '" + std::string(s) + "'");
}

WhitenTransform::WhitenTransform(DenseMatrix l, WhitenMethod method, double damping,
                                 std::size_t source_rows)
    : l_(std::move(l)), method_(method), damping_(damping), source_rows_(source_rows) {
  if (l_.rows() != l_.cols()) throw ShapeError("WhitenTransform: L must be square");
  for (std::size_t i = 0; i < l_.rows(); ++i)
    if (l_(i, i) == 0.0) throw SingularTriangular(i, "WhitenTransform: L has a zero diagonal");
}

DenseMatrix WhitenTransform::whiten_inputs(const DenseMatrix& x) const {
  return linalg::solve_triangular_right(x, l_, linalg::Triangle::upper);
}

DenseMatrix gram_blocked(const DenseMatrix& x, std::size_t block_rows) {
  const std::size_t d = x.cols();
  DenseMatrix g(d, d);
  for (std::size_t r0 = 0; r0 < x.rows(); r0 += block_rows) {
    const std::size_t nr = std::min(block_rows, x.rows() - r0);
    g += gram(x.block(r0, 0, nr, d));
  }
  // Exact symmetry regardless of accumulation order.
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) g(j, i) = g(i, j);
  return g;
}

WhitenTransform fit_whitener(const DenseMatrix& x, WhitenMethod method, double damping) {
  if (x.cols() == 0 || x.rows() == 0) throw ShapeError("fit_whitener: empty calibration matrix");
  if (!(damping >= 0.0) || !std::isfinite(damping))
    throw InvalidConfig("fit_whitener: damping must be a finite non-negative number");
  const std::size_t d1 = x.cols();
  if (damping == 0.0 && x.rows() < d1) throw_rank_deficient(x.rows());

  if (method == WhitenMethod::cholesky) {
    DenseMatrix g = gram_blocked(x);
    const double mean_diag = mean_diagonal(g);
    if (!(mean_diag > 0.0)) throw_rank_deficient(0);
    if (damping > 0.0)
      for (std::size_t i = 0; i < d1; ++i) g(i, i) += damping * mean_diag;
    DenseMatrix c;
    try {
      c = linalg::cholesky(g);
    } catch (const NotPositiveDefinite& e) {
      throw_rank_deficient(e.pivot());
    }
    if (damping == 0.0) {
      double max_diag = 0.0;
      for (std::size_t i = 0; i < d1; ++i) max_diag = std::max(max_diag, g(i, i));
      const double tol = kCholeskyRankTol * std::sqrt(max_diag);
      for (std::size_t i = 0; i < d1; ++i)
        if (c(i, i) <= tol) throw_rank_deficient(i);
    }
    return {std::move(c), method, damping, x.rows()};
  }

  DenseMatrix a = x;
  if (damping > 0.0) {
    const double mean_diag = mean_diagonal(gram_blocked(x));
    if (!(mean_diag > 0.0)) throw_rank_deficient(0);
    DenseMatrix ridge = DenseMatrix::identity(d1) * std::sqrt(damping * mean_diag);
    const DenseMatrix parts[] = {x, ridge};
    a = vstack(parts);
  }
  try {
    auto qr = linalg::qr_factor(a);
    return {std::move(qr.r), method, damping, x.rows()};
  } catch (const RankDeficient& e) {
    throw_rank_deficient(e.column());
  }
}

DenseMatrix whiten_weights(const WhitenTransform& t, const DenseMatrix& w) {
  if (w.rows() != t.dim()) {
    throw ShapeError("whiten_weights: W has " + std::to_string(w.rows()) +
                     " rows, transform expects " + std::to_string(t.dim()));
  }
  return matmul(t.matrix(), w);
}

DenseMatrix dewhiten_dictionary(const WhitenTransform& t, const DenseMatrix& d_l) {
  if (d_l.rows() != t.dim()) {
    throw ShapeError("dewhiten_dictionary: D_L has " + std::to_string(d_l.rows()) +
                     " rows, transform expects " + std::to_string(t.dim()));
  }
  return linalg::solve_triangular(t.matrix(), d_l, linalg::Triangle::upper);
}

}  // namespace cospadi
