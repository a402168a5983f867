#include "cospadi/factorizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "cospadi/error.hpp"
#include "cospadi/linalg.hpp"
#include "cospadi/parallel.hpp"

namespace cospadi {

// ---------------------------------------------------------------------------
// SparseCodes

SparseCodes::SparseCodes(std::size_t k, std::size_t s, std::vector<SparseColumn> columns)
    : k_(k), s_(s), columns_(std::move(columns)) {
  validate();
}

SparseCodes SparseCodes::zeros(std::size_t k, std::size_t s, std::size_t d2) {
  return SparseCodes(k, s, std::vector<SparseColumn>(d2));
}

std::uint64_t SparseCodes::nnz() const {
  std::uint64_t n = 0;
  for (const auto& c : columns_) n += c.nnz();
  return n;
}

void SparseCodes::validate() const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& c = columns_[j];
    const std::string where = "column " + std::to_string(j);
    if (c.support.size() != c.values.size())
      throw CorruptCodes(where + ": support and value lengths differ");
    if (c.support.size() > s_)
      throw CorruptCodes(where + ": " + std::to_string(c.support.size()) +
                         " nonzeros exceed sparsity " + std::to_string(s_));
    for (std::size_t p = 0; p < c.support.size(); ++p) {
      if (c.support[p] >= k_) throw CorruptCodes(where + ": atom index out of range");
      if (p > 0 && c.support[p] <= c.support[p - 1])
        throw CorruptCodes(where + ": support not strictly increasing");
      if (c.values[p] == 0.0 || !std::isfinite(c.values[p]))
        throw CorruptCodes(where + ": stored value is zero or non-finite");
    }
  }
}

DenseMatrix SparseCodes::to_dense() const {
  DenseMatrix s(k_, columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j)
    for (std::size_t p = 0; p < columns_[j].nnz(); ++p)
      s(columns_[j].support[p], j) = columns_[j].values[p];
  return s;
}

SparseCodes SparseCodes::slice_columns(std::size_t first, std::size_t count) const {
  if (first + count > columns_.size()) throw ShapeError("slice_columns: range out of bounds");
  std::vector<SparseColumn> cols(columns_.begin() + static_cast<std::ptrdiff_t>(first),
                                 columns_.begin() + static_cast<std::ptrdiff_t>(first + count));
  return SparseCodes(k_, s_, std::move(cols));
}

DenseMatrix multiply_codes(const DenseMatrix& d, const SparseCodes& codes) {
  if (d.cols() != codes.k()) throw ShapeError("multiply_codes: dictionary width != k");
  DenseMatrix out(d.rows(), codes.cols());
  for (std::size_t j = 0; j < codes.cols(); ++j) {
    const auto& c = codes.column(j);
    for (std::size_t p = 0; p < c.nnz(); ++p) {
      const std::size_t a = c.support[p];
      const double v = c.values[p];
      for (std::size_t i = 0; i < d.rows(); ++i) out(i, j) += d(i, a) * v;
    }
  }
  return out;
}

DenseMatrix CompressedFactorization::reconstruct() const {
  return multiply_codes(dictionary.atoms, codes);
}

std::string_view to_string(InitMethod m) {
  switch (m) {
    case InitMethod::column_sample: return "column_sample";
    case InitMethod::gaussian: return "gaussian";
    case InitMethod::svd_based: return "svd_based";
  }
  return "column_sample";
}

InitMethod parse_init_method(std::string_view s) {
  if (s == "column_sample" || s == "column-sample") return InitMethod::column_sample;
  if (s == "gaussian") return InitMethod::gaussian;
  if (s == "svd_based" || s == "svd-based" || s == "svd") return InitMethod::svd_based;
  throw InvalidConfig("unknown init method '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// OMP

namespace {

using Column = std::vector<double>;

class OmpCoder {
 public:
  explicit OmpCoder(const DenseMatrix& atoms) : d1_(atoms.rows()), k_(atoms.cols()) {
    cols_.reserve(k_);
    norms_.reserve(k_);
    for (std::size_t i = 0; i < k_; ++i) {
      cols_.push_back(atoms.column(i));
      norms_.push_back(norm2(cols_.back()));
    }
  }

  SparseColumn encode(std::span<const double> w, std::size_t s) const {
    if (w.size() != d1_) throw ShapeError("omp_encode: signal length does not match atoms");
    SparseColumn out;
    const double wnorm = norm2(w);
    if (wnorm == 0.0 || s == 0) return out;

    std::vector<bool> blocked(k_, false);
    for (std::size_t i = 0; i < k_; ++i) blocked[i] = !(norms_[i] > 0.0);

    std::vector<Column> basis;      // orthonormal Q
    std::vector<Column> triangle;   // columns of R, column t has t+1 entries
    std::vector<double> projected;  // Qᵀw
    std::vector<std::uint32_t> selected;
    Column residual(w.begin(), w.end());

    while (selected.size() < s) {
      if (norm2(residual) < 1e-12 * wnorm) break;
      std::size_t best = k_;
      double best_score = 0.0;
      for (std::size_t i = 0; i < k_; ++i) {
        if (blocked[i]) continue;
        const double score = std::abs(dot(residual, cols_[i])) / norms_[i];
        if (score > best_score) {
          best_score = score;
          best = i;
        }
      }
      if (best == k_) break;

      Column q = cols_[best];
      Column h(basis.size() + 1, 0.0);
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t o = 0; o < basis.size(); ++o) {
          const double c = dot(basis[o], q);
          h[o] += c;
          for (std::size_t i = 0; i < d1_; ++i) q[i] -= c * basis[o][i];
        }
      }
      const double qn = norm2(q);
      blocked[best] = true;
      if (qn <= 1e-12 * norms_[best]) continue;  // dependent on the current selection
      for (double& e : q) e /= qn;
      h.back() = qn;
      projected.push_back(dot(q, w));
      basis.push_back(std::move(q));
      triangle.push_back(std::move(h));
      selected.push_back(static_cast<std::uint32_t>(best));

      std::copy(w.begin(), w.end(), residual.begin());
      for (std::size_t o = 0; o < basis.size(); ++o)
        for (std::size_t i = 0; i < d1_; ++i) residual[i] -= projected[o] * basis[o][i];
    }

    const std::size_t t = selected.size();
    std::vector<double> coef(t, 0.0);
    for (std::size_t r = t; r-- > 0;) {
      double acc = projected[r];
      for (std::size_t c = r + 1; c < t; ++c) acc -= triangle[c][r] * coef[c];
      coef[r] = acc / triangle[r][r];
    }

    std::vector<std::size_t> order(t);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return selected[a] < selected[b]; });
    for (std::size_t idx : order) {
      if (coef[idx] == 0.0) continue;
      out.support.push_back(selected[idx]);
      out.values.push_back(coef[idx]);
    }
    return out;
  }

 private:
  std::size_t d1_;
  std::size_t k_;
  std::vector<Column> cols_;
  std::vector<double> norms_;
};

double column_residual(const DenseMatrix& w, std::size_t j, const DenseMatrix& d,
                       const SparseColumn& c) {
  Column r = w.column(j);
  for (std::size_t p = 0; p < c.nnz(); ++p)
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= d(i, c.support[p]) * c.values[p];
  return norm2(r);
}

void normalize_into(DenseMatrix& d, std::size_t col, Column v) {
  const double n = norm2(v);
  for (double& e : v) e /= n;
  d.set_column(col, v);
}

void fill_gaussian_atom(DenseMatrix& d, std::size_t col, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Column v(d.rows());
  do {
    for (double& e : v) e = normal(rng);
  } while (norm2(v) == 0.0);
  normalize_into(d, col, std::move(v));
}

DenseMatrix initial_dictionary(const DenseMatrix& w_l, std::size_t k, const KsvdOptions& opt,
                               std::mt19937_64& rng) {
  const std::size_t d1 = w_l.rows();
  const std::size_t d2 = w_l.cols();
  DenseMatrix d(d1, k);
  std::size_t filled = 0;

  if (opt.init == InitMethod::column_sample) {
    std::vector<std::size_t> perm(d2);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t idx : perm) {
      if (filled == k) break;
      Column c = w_l.column(idx);
      const double n = norm2(c);
      if (n == 0.0) continue;
      // Columns pointing along an atom already taken add nothing; they would
      // split one cluster between two atoms.
      bool repeated = false;
      for (std::size_t a = 0; a < filled && !repeated; ++a) {
        double acc = 0.0;
        for (std::size_t r = 0; r < d1; ++r) acc += d(r, a) * c[r];
        repeated = std::abs(acc) >= (1.0 - 1e-10) * n;
      }
      if (repeated) continue;
      normalize_into(d, filled++, std::move(c));
    }
  } else if (opt.init == InitMethod::svd_based) {
    const auto svd = linalg::thin_svd(w_l);
    for (std::size_t i = 0; i < svd.singular_values.size() && filled < k; ++i) {
      if (!(svd.singular_values[i] > 0.0)) break;
      d.set_column(filled++, svd.u.column(i));
    }
  }
  for (; filled < k; ++filled) fill_gaussian_atom(d, filled, rng);
  return d;
}

}  // namespace

SparseColumn omp_encode(const Dictionary& d, std::span<const double> w, std::size_t s) {
  if (s > d.size()) throw InvalidConfig("omp_encode: sparsity exceeds dictionary size");
  return OmpCoder(d.atoms).encode(w, s);
}

SparseCodes sparse_code_all(const Dictionary& d, const DenseMatrix& w_l, std::size_t s) {
  if (w_l.rows() != d.dim()) throw ShapeError("sparse_code_all: W_L rows != atom dimension");
  if (s > d.size()) throw InvalidConfig("sparse_code_all: sparsity exceeds dictionary size");
  const OmpCoder coder(d.atoms);
  std::vector<SparseColumn> cols(w_l.cols());
  parallel_for(w_l.cols(), [&](std::size_t j) {
    const Column wj = w_l.column(j);
    cols[j] = coder.encode(wj, s);
  });
  return SparseCodes(d.size(), s, std::move(cols));
}

// ---------------------------------------------------------------------------
// K-SVD

KsvdResult ksvd_fit(const DenseMatrix& w_l, std::size_t k, std::size_t s,
                    const KsvdOptions& opt) {
  if (k < 1) throw InvalidConfig("ksvd_fit: k must be >= 1");
  if (s < 1) throw InvalidConfig("ksvd_fit: s must be >= 1");
  if (s > k) throw InvalidConfig("ksvd_fit: s must not exceed k");
  if (opt.iters < 1) throw InvalidConfig("ksvd_fit: iteration count must be >= 1");
  if (opt.power_iters < 1) throw InvalidConfig("ksvd_fit: power iteration count must be >= 1");
  if (w_l.rows() == 0 || w_l.cols() == 0) throw ShapeError("ksvd_fit: empty weight matrix");

  const std::size_t d1 = w_l.rows();
  const std::size_t d2 = w_l.cols();
  std::mt19937_64 rng(opt.seed);

  KsvdResult result;
  if (w_l.frobenius_norm() == 0.0) {
    DenseMatrix d(d1, k);
    for (std::size_t i = 0; i < k; ++i) fill_gaussian_atom(d, i, rng);
    result.dictionary = {std::move(d), DictionarySpace::whitened};
    result.codes = SparseCodes::zeros(k, s, d2);
    result.report.converged = true;
    return result;
  }

  Dictionary dict{initial_dictionary(w_l, k, opt, rng), DictionarySpace::whitened};
  std::vector<SparseColumn> current(d2);
  std::vector<double> column_error(d2, 0.0);
  for (std::size_t j = 0; j < d2; ++j) column_error[j] = norm2(w_l.column(j));

  auto& report = result.report;
  double previous = 0.0;
  for (int t = 1; t <= opt.iters; ++t) {
    // Sparse coding.
    const SparseCodes fresh = sparse_code_all(dict, w_l, s);
    for (std::size_t j = 0; j < d2; ++j) {
      const double err = column_residual(w_l, j, dict.atoms, fresh.column(j));
      if (t == 1 || err <= column_error[j]) {
        current[j] = fresh.column(j);
        column_error[j] = err;
      }
    }

    DenseMatrix coef = SparseCodes(k, s, current).to_dense();
    DenseMatrix residual = w_l - matmul(dict.atoms, coef);
    if (t == 1) {
      report.initial_objective = residual.frobenius_norm();
      previous = report.initial_objective;
    }

    // Dictionary update, atoms in ascending order.
    int replaced_now = 0;
    std::vector<bool> used_for_replacement(d2, false);
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<std::size_t> omega;
      for (std::size_t j = 0; j < d2; ++j)
        if (coef(i, j) != 0.0) omega.push_back(j);

      if (omega.empty()) {
        std::size_t worst = d2;
        double worst_err = -1.0;
        for (std::size_t j = 0; j < d2; ++j) {
          if (used_for_replacement[j]) continue;
          double e2 = 0.0;
          for (std::size_t r = 0; r < d1; ++r) e2 += residual(r, j) * residual(r, j);
          if (e2 > worst_err) {
            worst_err = e2;
            worst = j;
          }
        }
        if (worst == d2) continue;
        used_for_replacement[worst] = true;
        Column c = w_l.column(worst);
        if (norm2(c) == 0.0) continue;
        normalize_into(dict.atoms, i, std::move(c));
        ++replaced_now;
        continue;
      }

      const std::size_t m = omega.size();
      DenseMatrix r_i(d1, m);
      double old_err2 = 0.0;
      for (std::size_t r = 0; r < d1; ++r) {
        const double atom = dict.atoms(r, i);
        for (std::size_t c = 0; c < m; ++c) {
          const double e = residual(r, omega[c]);
          old_err2 += e * e;
          r_i(r, c) = e + atom * coef(i, omega[c]);
        }
      }

      Column u(d1, 0.0);
      Column row(m, 0.0);
      try {
        auto triple = linalg::rank1_svd_power(r_i, opt.power_iters);
        u = std::move(triple.u);
        for (std::size_t c = 0; c < m; ++c) row[c] = triple.sigma * triple.v[c];
      } catch (const ZeroResidual&) {
        u = dict.atoms.column(i);
      }

      DenseMatrix updated(d1, m);
      double new_err2 = 0.0;
      for (std::size_t r = 0; r < d1; ++r) {
        for (std::size_t c = 0; c < m; ++c) {
          const double e = r_i(r, c) - u[r] * row[c];
          updated(r, c) = e;
          new_err2 += e * e;
        }
      }
      if (new_err2 > old_err2) continue;  // inexact power step; keep the current atom

      dict.atoms.set_column(i, u);
      for (std::size_t c = 0; c < m; ++c) {
        coef(i, omega[c]) = row[c];
        for (std::size_t r = 0; r < d1; ++r) residual(r, omega[c]) = updated(r, c);
      }
    }

    // Fold the updated coefficients back into per-column codes.
    for (std::size_t j = 0; j < d2; ++j) {
      SparseColumn c;
      for (std::size_t i = 0; i < k; ++i) {
        if (coef(i, j) == 0.0) continue;
        c.support.push_back(static_cast<std::uint32_t>(i));
        c.values.push_back(coef(i, j));
      }
      current[j] = std::move(c);
    }
    const SparseCodes codes(k, s, current);
    const DenseMatrix fresh_residual = w_l - multiply_codes(dict.atoms, codes);
    for (std::size_t j = 0; j < d2; ++j) column_error[j] = norm2(fresh_residual.column(j));
    const double objective = fresh_residual.frobenius_norm();

    report.objective_per_iter.push_back(objective);
    report.iterations_run = t;
    report.atoms_replaced += replaced_now;

    if (objective == 0.0 ||
        (replaced_now == 0 && previous > 0.0 && (previous - objective) / previous < opt.tolerance)) {
      report.converged = true;
      break;
    }
    previous = objective;
  }

  result.dictionary = std::move(dict);
  result.codes = SparseCodes(k, s, std::move(current));
  return result;
}

CompressedFactorization compress_layer(const DenseMatrix& w, const DenseMatrix& x,
                                       const SizingPlan& plan, const CompressOptions& options) {
  if (plan.kind != PlanKind::sparse) throw InvalidConfig("compress_layer: plan is not a sparse plan");
  if (x.cols() != w.rows()) {
    throw ShapeError("compress_layer: calibration has " + std::to_string(x.cols()) +
                     " columns but W has " + std::to_string(w.rows()) + " rows");
  }
  if (plan.d1 != w.rows() || plan.d2 != w.cols()) {
    throw ShapeError("compress_layer: plan sized for " + std::to_string(plan.d1) + "x" +
                     std::to_string(plan.d2) + ", weights are " + std::to_string(w.rows()) +
                     "x" + std::to_string(w.cols()));
  }
  const auto transform = fit_whitener(x, options.whiten, options.damping);
  const DenseMatrix w_l = whiten_weights(transform, w);
  auto fit = ksvd_fit(w_l, plan.k, plan.s, options.ksvd);

  CompressedFactorization out;
  out.dictionary = {dewhiten_dictionary(transform, fit.dictionary.atoms),
                    DictionarySpace::activation};
  out.codes = std::move(fit.codes);
  out.plan = plan;
  out.report = std::move(fit.report);
  return out;
}

}  // namespace cospadi
