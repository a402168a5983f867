#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "cospadi/matrix.hpp"
#include "cospadi/planner.hpp"
#include "cospadi/whitening.hpp"

namespace cospadi {

// One column of a sparse code matrix: strictly increasing atom indices with
// aligned, nonzero values.
struct SparseColumn {
  std::vector<std::uint32_t> support;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return support.size(); }
  friend bool operator==(const SparseColumn&, const SparseColumn&) = default;
};

// Column-s-sparse coefficient matrix S (k x d2).
class SparseCodes {
 public:
  SparseCodes() = default;
  SparseCodes(std::size_t k, std::size_t s, std::vector<SparseColumn> columns);
  static SparseCodes zeros(std::size_t k, std::size_t s, std::size_t d2);

  std::size_t k() const noexcept { return k_; }
  std::size_t s() const noexcept { return s_; }
  std::size_t cols() const noexcept { return columns_.size(); }
  const SparseColumn& column(std::size_t j) const { return columns_[j]; }
  std::span<const SparseColumn> columns() const noexcept { return columns_; }
  std::uint64_t nnz() const;

  // Throws CorruptCodes if any column breaks the sparsity/order/nonzero rules.
  void validate() const;

  DenseMatrix to_dense() const;
  // Columns [first, first + count) as their own code matrix.
  SparseCodes slice_columns(std::size_t first, std::size_t count) const;

  friend bool operator==(const SparseCodes&, const SparseCodes&) = default;

 private:
  std::size_t k_ = 0;
  std::size_t s_ = 0;
  std::vector<SparseColumn> columns_;
};

enum class DictionarySpace { whitened, activation };

struct Dictionary {
  DenseMatrix atoms;  // d1 x k
  DictionarySpace space = DictionarySpace::whitened;

  std::size_t dim() const noexcept { return atoms.rows(); }
  std::size_t size() const noexcept { return atoms.cols(); }
  friend bool operator==(const Dictionary&, const Dictionary&) = default;
};

struct FactorizeReport {
  // ‖W_L − D_L S‖_F at the end of each K-SVD iteration.
  std::vector<double> objective_per_iter;
  // Objective after coding with the initial dictionary, before any update.
  double initial_objective = 0.0;
  int iterations_run = 0;
  int atoms_replaced = 0;
  bool converged = false;
};

enum class InitMethod { column_sample, gaussian, svd_based };

std::string_view to_string(InitMethod m);
InitMethod parse_init_method(std::string_view s);

struct KsvdOptions {
  int iters = 60;
  int power_iters = 8;
  InitMethod init = InitMethod::column_sample;
  std::uint64_t seed = 0;
  double tolerance = 1e-7;
};

struct KsvdResult {
  Dictionary dictionary;
  SparseCodes codes;
  FactorizeReport report;
};

// Greedy OMP: picks the unselected atom maximizing |⟨r, d_i⟩| / ‖d_i‖ (ties
// go to the lowest index), re-solves least squares over the selection, and
// stops at s atoms or once ‖r‖ < 1e-12‖w‖. Atoms numerically dependent on the
// current selection are skipped. Exact-zero coefficients are pruned.
SparseColumn omp_encode(const Dictionary& d, std::span<const double> w, std::size_t s);

// omp_encode on every column of W_L; columns are coded in parallel.
SparseCodes sparse_code_all(const Dictionary& d, const DenseMatrix& w_l, std::size_t s);

// K-SVD on whitened weights: alternate OMP coding with sequential rank-1
// atom updates (power iteration), replacing unused atoms by the
// worst-reconstructed column of W_L. A coding pass keeps a column's previous
// code when OMP does not improve on it, and an atom update is only accepted
// when it does not increase the residual, so the recorded objective never
// increases.
KsvdResult ksvd_fit(const DenseMatrix& w_l, std::size_t k, std::size_t s,
                    const KsvdOptions& options = {});

struct CompressOptions {
  KsvdOptions ksvd;
  WhitenMethod whiten = WhitenMethod::cholesky;
  double damping = 0.0;
};

struct CompressedFactorization {
  Dictionary dictionary;  // D_a, activation space
  SparseCodes codes;
  SizingPlan plan;
  FactorizeReport report;

  DenseMatrix reconstruct() const;
};

// whiten -> K-SVD -> de-whiten for one weight matrix W (d1 x d2) with
// calibration inputs X (N x d1).
CompressedFactorization compress_layer(const DenseMatrix& w, const DenseMatrix& x,
                                       const SizingPlan& plan, const CompressOptions& options = {});

// D·S for dense D and sparse S.
DenseMatrix multiply_codes(const DenseMatrix& d, const SparseCodes& codes);

}  // namespace cospadi
