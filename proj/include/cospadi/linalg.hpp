#pragma once

#include <cstddef>
#include <vector>

#include "cospadi/matrix.hpp"

namespace cospadi::linalg {

struct QrFactors {
  DenseMatrix q;  // rows x cols, orthonormal columns
  DenseMatrix r;  // cols x cols, upper triangular, non-negative diagonal
};

// Householder QR of a tall matrix. Throws RankDeficient when a diagonal
// entry of R falls below 1e-12 * max|X|.
QrFactors qr_factor(const DenseMatrix& x);

// Upper-triangular C with CᵀC = G. Throws NotSymmetric, NotPositiveDefinite.
DenseMatrix cholesky(const DenseMatrix& g);

struct ThinSvd {
  DenseMatrix u;                      // rows x p
  std::vector<double> singular_values;  // p values, non-increasing
  DenseMatrix vt;                     // p x cols
};

inline constexpr int kSvdMaxSweeps = 100;

// Full thin SVD with p = min(rows, cols), computed by one-sided Jacobi.
// Each left singular vector has its largest-magnitude entry positive.
ThinSvd thin_svd(const DenseMatrix& a);

struct Rank1Triple {
  std::vector<double> u;
  double sigma = 0.0;
  std::vector<double> v;
};

// Power iteration on RRᵀ started from the largest-norm column of R.
// The returned v is Rᵀu / σ, so σ·vᵀ is the best coefficient row for u.
// Throws ZeroResidual when R is identically zero.
Rank1Triple rank1_svd_power(const DenseMatrix& r, int iters);

enum class Triangle { lower, upper };

// Solves T·X = B.
DenseMatrix solve_triangular(const DenseMatrix& t, const DenseMatrix& b, Triangle side);
// Solves X·T = B, i.e. returns B·T⁻¹.
DenseMatrix solve_triangular_right(const DenseMatrix& b, const DenseMatrix& t, Triangle side);

// Orthonormal basis for a full-column-rank matrix (Gram-Schmidt with
// reorthogonalization); used for random orthonormal draws.
DenseMatrix orthonormalize_columns(const DenseMatrix& a);

}  // namespace cospadi::linalg
