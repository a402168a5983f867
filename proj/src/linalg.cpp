#include "cospadi/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cospadi/error.hpp"

namespace cospadi::linalg {

namespace {

using Column = std::vector<double>;

std::vector<Column> to_columns(const DenseMatrix& a) {
  std::vector<Column> cols(a.cols(), Column(a.rows()));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) cols[j][i] = a(i, j);
  return cols;
}

DenseMatrix from_columns(const std::vector<Column>& cols, std::size_t rows) {
  DenseMatrix m(rows, cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (std::size_t i = 0; i < rows; ++i) m(i, j) = cols[j][i];
  return m;
}

// Householder QR without rank checks. Columns of the result are stored
// column-major for the reflector sweeps; diag(R) is made non-negative.
QrFactors householder_qr(const DenseMatrix& x) {
  const std::size_t m = x.rows();
  const std::size_t n = x.cols();
  auto a = to_columns(x);
  std::vector<Column> reflectors;
  reflectors.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Column v(m - k);
    for (std::size_t i = k; i < m; ++i) v[i - k] = a[k][i];
    const double alpha = norm2(v);
    Column h(m - k, 0.0);
    if (alpha > 0.0) {
      const double sign = v[0] >= 0.0 ? 1.0 : -1.0;
      v[0] += sign * alpha;
      const double vn = norm2(v);
      for (double& e : v) e /= vn;
      h = v;
      for (std::size_t j = k; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += h[i - k] * a[j][i];
        s *= 2.0;
        for (std::size_t i = k; i < m; ++i) a[j][i] -= s * h[i - k];
      }
    }
    reflectors.push_back(std::move(h));
  }

  DenseMatrix r(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i <= j; ++i) r(i, j) = a[j][i];

  // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of the identity.
  std::vector<Column> q(n, Column(m, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    q[j][j] = 1.0;
    for (std::size_t kk = n; kk-- > 0;) {
      const auto& h = reflectors[kk];
      double s = 0.0;
      for (std::size_t i = kk; i < m; ++i) s += h[i - kk] * q[j][i];
      if (s == 0.0) continue;
      s *= 2.0;
      for (std::size_t i = kk; i < m; ++i) q[j][i] -= s * h[i - kk];
    }
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (r(k, k) < 0.0) {
      for (std::size_t j = k; j < n; ++j) r(k, j) = -r(k, j);
      for (double& e : q[k]) e = -e;
    }
  }
  return {from_columns(q, m), std::move(r)};
}

// Completes a partial orthonormal set: each empty slot receives the unit
// vector e_i with the largest component orthogonal to the current set.
void complete_basis(std::vector<Column>& u, std::vector<bool>& filled) {
  const std::size_t m = u.empty() ? 0 : u.front().size();
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (filled[j]) continue;
    Column best;
    double best_norm = -1.0;
    for (std::size_t cand = 0; cand < m; ++cand) {
      Column e(m, 0.0);
      e[cand] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t o = 0; o < u.size(); ++o) {
          if (!filled[o]) continue;
          const double c = dot(u[o], e);
          for (std::size_t i = 0; i < m; ++i) e[i] -= c * u[o][i];
        }
      }
      const double en = norm2(e);
      if (en > best_norm + 1e-12) {
        best_norm = en;
        best = std::move(e);
      }
    }
    for (double& x : best) x /= best_norm;
    u[j] = std::move(best);
    filled[j] = true;
  }
}

struct RawSvd {
  std::vector<Column> u;
  std::vector<double> sigma;
  std::vector<Column> v;
};

// One-sided (Hestenes) Jacobi on a matrix with rows >= cols.
RawSvd jacobi_svd(const DenseMatrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  auto g = to_columns(a);
  std::vector<Column> v(n, Column(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  const double kTol = static_cast<double>(std::max<std::size_t>(m, 1)) *
                      std::numeric_limits<double>::epsilon();
  bool converged = n < 2;
  for (int sweep = 0; sweep < kSvdMaxSweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(g[p], g[p]);
        const double beta = dot(g[q], g[q]);
        const double gamma = dot(g[p], g[q]);
        if (gamma == 0.0 || std::abs(gamma) <= kTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double gp = g[p][i];
          const double gq = g[q][i];
          g[p][i] = c * gp - s * gq;
          g[q][i] = s * gp + c * gq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v[p][i];
          const double vq = v[q][i];
          v[p][i] = c * vp - s * vq;
          v[q][i] = s * vp + c * vq;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged) {
    throw SvdNoConvergence("thin_svd: Jacobi did not converge in " +
                           std::to_string(kSvdMaxSweeps) + " sweeps");
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(g[j]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  RawSvd out;
  out.u.resize(n);
  out.v.resize(n);
  out.sigma.resize(n);
  const double smax = n ? sigma[order[0]] : 0.0;
  std::vector<bool> filled(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.v[k] = v[j];
    const double sj = sigma[j];
    if (sj > 0.0 && sj > smax * 1e-15 && sj > std::numeric_limits<double>::min()) {
      out.sigma[k] = sj;
      out.u[k] = g[j];
      for (double& e : out.u[k]) e /= sj;
      filled[k] = true;
    } else {
      out.sigma[k] = 0.0;
      out.u[k] = Column(m, 0.0);
    }
  }
  complete_basis(out.u, filled);
  return out;
}

}  // namespace

QrFactors qr_factor(const DenseMatrix& x) {
  if (x.rows() < x.cols()) {
    throw ShapeError("qr_factor: need rows >= cols, got " + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()));
  }
  auto f = householder_qr(x);
  const double tol = 1e-12 * x.max_abs();
  for (std::size_t k = 0; k < x.cols(); ++k) {
    if (f.r(k, k) <= tol) {
      throw RankDeficient(k, "qr_factor: rank deficient at column " + std::to_string(k));
    }
  }
  return f;
}

DenseMatrix cholesky(const DenseMatrix& g) {
  const std::size_t n = g.rows();
  if (g.cols() != n) throw ShapeError("cholesky: matrix is not square");
  const double scale = std::max(1.0, g.max_abs());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(g(i, j) - g(j, i)) > 1e-10 * scale)
        throw NotSymmetric("cholesky: input is not symmetric");

  DenseMatrix c(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = g(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= c(k, j) * c(k, j);
    if (!(pivot > 0.0)) {
      throw NotPositiveDefinite(j, "cholesky: non-positive pivot at index " + std::to_string(j));
    }
    const double cjj = std::sqrt(pivot);
    c(j, j) = cjj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = g(j, i);
      for (std::size_t k = 0; k < j; ++k) s -= c(k, j) * c(k, i);
      c(j, i) = s / cjj;
    }
  }
  return c;
}

ThinSvd thin_svd(const DenseMatrix& a) {
  if (!a.all_finite()) throw NonFiniteValue("thin_svd: non-finite input");
  const bool wide = a.rows() < a.cols();
  const DenseMatrix tall = wide ? a.transpose() : a;

  RawSvd raw;
  if (tall.rows() > tall.cols()) {
    auto qr = householder_qr(tall);
    raw = jacobi_svd(qr.r);
    // Lift the left vectors of R back through Q.
    const DenseMatrix ur = from_columns(raw.u, qr.r.rows());
    const DenseMatrix lifted = matmul(qr.q, ur);
    raw.u = to_columns(lifted);
  } else {
    raw = jacobi_svd(tall);
  }
  if (wide) std::swap(raw.u, raw.v);

  const std::size_t p = raw.sigma.size();
  for (std::size_t k = 0; k < p; ++k) {
    auto& u = raw.u[k];
    std::size_t arg = 0;
    for (std::size_t i = 1; i < u.size(); ++i)
      if (std::abs(u[i]) > std::abs(u[arg])) arg = i;
    if (!u.empty() && u[arg] < 0.0) {
      for (double& e : u) e = -e;
      for (double& e : raw.v[k]) e = -e;
    }
  }

  ThinSvd out;
  out.u = from_columns(raw.u, a.rows());
  out.singular_values = std::move(raw.sigma);
  out.vt = from_columns(raw.v, a.cols()).transpose();
  return out;
}

Rank1Triple rank1_svd_power(const DenseMatrix& r, int iters) {
  if (iters < 1) throw InvalidConfig("rank1_svd_power: iters must be >= 1");
  const std::size_t m = r.rows();
  const std::size_t n = r.cols();

  std::size_t best = 0;
  double best_norm = -1.0;
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += r(i, j) * r(i, j);
    if (s > best_norm) {
      best_norm = s;
      best = j;
    }
  }
  if (!(best_norm > 0.0)) throw ZeroResidual("rank1_svd_power: residual is identically zero");

  std::vector<double> u = r.column(best);
  std::vector<double> v(n);
  auto normalize = [](std::vector<double>& x) {
    const double nx = norm2(x);
    if (nx > 0.0)
      for (double& e : x) e /= nx;
    return nx;
  };
  auto apply_t = [&](const std::vector<double>& x, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double xi = x[i];
      auto row = r.row(i);
      for (std::size_t j = 0; j < n; ++j) out[j] += xi * row[j];
    }
  };
  normalize(u);
  for (int it = 0; it < iters; ++it) {
    apply_t(u, v);
    normalize(v);
    for (std::size_t i = 0; i < m; ++i) u[i] = dot(r.row(i), v);
    normalize(u);
  }
  apply_t(u, v);
  const double sigma = normalize(v);
  return {std::move(u), sigma, std::move(v)};
}

DenseMatrix solve_triangular(const DenseMatrix& t, const DenseMatrix& b, Triangle side) {
  const std::size_t n = t.rows();
  if (t.cols() != n) throw ShapeError("solve_triangular: T is not square");
  if (b.rows() != n) throw ShapeError("solve_triangular: B row count does not match T");
  for (std::size_t i = 0; i < n; ++i)
    if (t(i, i) == 0.0)
      throw SingularTriangular(i, "solve_triangular: zero diagonal at " + std::to_string(i));

  DenseMatrix x = b;
  const std::size_t nrhs = b.cols();
  if (side == Triangle::lower) {
    for (std::size_t i = 0; i < n; ++i) {
      auto xi = x.row(i);
      for (std::size_t k = 0; k < i; ++k) {
        const double tik = t(i, k);
        if (tik == 0.0) continue;
        auto xk = x.row(k);
        for (std::size_t c = 0; c < nrhs; ++c) xi[c] -= tik * xk[c];
      }
      for (std::size_t c = 0; c < nrhs; ++c) xi[c] /= t(i, i);
    }
  } else {
    for (std::size_t i = n; i-- > 0;) {
      auto xi = x.row(i);
      for (std::size_t k = i + 1; k < n; ++k) {
        const double tik = t(i, k);
        if (tik == 0.0) continue;
        auto xk = x.row(k);
        for (std::size_t c = 0; c < nrhs; ++c) xi[c] -= tik * xk[c];
      }
      for (std::size_t c = 0; c < nrhs; ++c) xi[c] /= t(i, i);
    }
  }
  return x;
}

DenseMatrix solve_triangular_right(const DenseMatrix& b, const DenseMatrix& t, Triangle side) {
  const std::size_t n = t.rows();
  if (t.cols() != n) throw ShapeError("solve_triangular_right: T is not square");
  if (b.cols() != n) throw ShapeError("solve_triangular_right: B column count does not match T");
  for (std::size_t i = 0; i < n; ++i)
    if (t(i, i) == 0.0)
      throw SingularTriangular(i, "solve_triangular_right: zero diagonal at " + std::to_string(i));

  DenseMatrix x = b;
  for (std::size_t r = 0; r < b.rows(); ++r) {
    auto xr = x.row(r);
    if (side == Triangle::upper) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = xr[j];
        for (std::size_t i = 0; i < j; ++i) s -= xr[i] * t(i, j);
        xr[j] = s / t(j, j);
      }
    } else {
      for (std::size_t j = n; j-- > 0;) {
        double s = xr[j];
        for (std::size_t i = j + 1; i < n; ++i) s -= xr[i] * t(i, j);
        xr[j] = s / t(j, j);
      }
    }
  }
  return x;
}

DenseMatrix orthonormalize_columns(const DenseMatrix& a) {
  auto cols = to_columns(a);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const double original = norm2(cols[j]);
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t o = 0; o < j; ++o) {
        const double c = dot(cols[o], cols[j]);
        for (std::size_t i = 0; i < cols[j].size(); ++i) cols[j][i] -= c * cols[o][i];
      }
    }
    const double nj = norm2(cols[j]);
    if (!(nj > 1e-12 * original) || original == 0.0) {
      throw RankDeficient(j, "orthonormalize_columns: dependent column " + std::to_string(j));
    }
    for (double& e : cols[j]) e /= nj;
  }
  return from_columns(cols, a.rows());
}

}  // namespace cospadi::linalg
