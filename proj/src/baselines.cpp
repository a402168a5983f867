#include "cospadi/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "cospadi/error.hpp"
#include "cospadi/linalg.hpp"

namespace cospadi {

namespace {

void check_rank(std::size_t r, std::size_t d1, std::size_t d2) {
  if (r < 1 || r > std::min(d1, d2)) {
    throw InvalidRank("rank " + std::to_string(r) + " outside [1, " +
                      std::to_string(std::min(d1, d2)) + "]");
  }
}

LowRankFactorization truncate(const linalg::ThinSvd& svd, std::size_t r) {
  LowRankFactorization f;
  f.r = r;
  f.b = svd.u.block(0, 0, svd.u.rows(), r);
  f.c = svd.vt.block(0, 0, r, svd.vt.cols());
  for (std::size_t i = 0; i < r; ++i)
    for (double& v : f.c.row(i)) v *= svd.singular_values[i];
  return f;
}

}  // namespace

std::string_view to_string(LowRankMode m) { return m == LowRankMode::plain ? "plain" : "data_aware"; }

LowRankFactorization svd_truncate(const DenseMatrix& w, std::size_t r) {
  check_rank(r, w.rows(), w.cols());
  auto f = truncate(linalg::thin_svd(w), r);
  f.mode = LowRankMode::plain;
  return f;
}

LowRankFactorization data_aware_lowrank(const DenseMatrix& w, const WhitenTransform& t,
                                        std::size_t r) {
  check_rank(r, w.rows(), w.cols());
  const DenseMatrix delta = whiten_weights(t, w);
  auto f = truncate(linalg::thin_svd(delta), r);
  f.b = dewhiten_dictionary(t, f.b);
  f.mode = LowRankMode::data_aware;
  return f;
}

LowRankFactorization data_aware_lowrank(const DenseMatrix& w, const DenseMatrix& x, std::size_t r,
                                        double damping, WhitenMethod method) {
  check_rank(r, w.rows(), w.cols());
  return data_aware_lowrank(w, fit_whitener(x, method, damping), r);
}

PcaReport pca_check(const DenseMatrix& w, std::size_t r, std::size_t candidates,
                    std::uint64_t seed) {
  check_rank(r, w.rows(), w.cols());
  const auto svd = linalg::thin_svd(w);
  const auto f = truncate(svd, r);
  const double energy = w.frobenius_norm() * w.frobenius_norm();

  PcaReport rep;
  rep.candidates = candidates;
  const DenseMatrix projected = matmul_tn(f.b, w);
  rep.c_deviation = (f.c - projected).max_abs();
  rep.c_is_projection = rep.c_deviation <= 1e-8 * std::max(1.0, w.max_abs());

  const double fit = (w - f.reconstruct()).frobenius_norm();
  rep.objective = fit * fit;
  for (std::size_t i = r; i < svd.singular_values.size(); ++i)
    rep.tail += svd.singular_values[i] * svd.singular_values[i];
  rep.objective_is_tail = std::abs(rep.objective - rep.tail) <= 1e-8 * std::max(energy, 1e-300);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  rep.best_random = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates; ++c) {
    DenseMatrix g(w.rows(), r);
    for (double& v : g.data()) v = normal(rng);
    const DenseMatrix b = linalg::orthonormalize_columns(g);
    const DenseMatrix residual = w - matmul(b, matmul_tn(b, w));
    const double j = residual.frobenius_norm() * residual.frobenius_norm();
    rep.best_random = std::min(rep.best_random, j);
  }
  rep.beats_random = candidates == 0 || rep.objective <= rep.best_random + 1e-12 * energy;
  return rep;
}

double activation_error(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& w_approx) {
  return matmul(x, w - w_approx).frobenius_norm();
}

}  // namespace cospadi
