#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "cospadi/matrix.hpp"
#include "cospadi/whitening.hpp"

namespace cospadi {

enum class LowRankMode { plain, data_aware };

std::string_view to_string(LowRankMode m);

// W̃ = B·C with B (d1 x r) and C (r x d2).
struct LowRankFactorization {
  DenseMatrix b;
  DenseMatrix c;
  LowRankMode mode = LowRankMode::plain;
  std::size_t r = 0;

  DenseMatrix reconstruct() const { return matmul(b, c); }
};

// Eckart–Young optimum: B = U_r, C = Σ_r V_rᵀ. Throws InvalidRank.
LowRankFactorization svd_truncate(const DenseMatrix& w, std::size_t r);

// Activation-space optimum: Δ = L·W, B = L⁻¹U_r(Δ), C = Σ_r V_rᵀ(Δ).
LowRankFactorization data_aware_lowrank(const DenseMatrix& w, const WhitenTransform& t,
                                        std::size_t r);
LowRankFactorization data_aware_lowrank(const DenseMatrix& w, const DenseMatrix& x, std::size_t r,
                                        double damping = 0.0,
                                        WhitenMethod method = WhitenMethod::cholesky);

// Clause-by-clause check that truncated SVD solves the PCA form
// min_{BᵀB=I, C} ‖W − BC‖²: (a) C* = B*ᵀW, (b) J(B*, C*) equals the squared
// singular-value tail, (c) no random orthonormal B does better.
struct PcaReport {
  bool c_is_projection = false;
  bool objective_is_tail = false;
  bool beats_random = false;
  double c_deviation = 0.0;     // max |C* − B*ᵀW|
  double objective = 0.0;       // J(B*, C*)
  double tail = 0.0;            // Σ_{i>r} σ_i²
  double best_random = 0.0;     // min J over random candidates
  std::size_t candidates = 0;

  bool all() const { return c_is_projection && objective_is_tail && beats_random; }
};

PcaReport pca_check(const DenseMatrix& w, std::size_t r, std::size_t candidates = 100,
                    std::uint64_t seed = 0);

// ‖X·W − X·W̃‖_F
double activation_error(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& w_approx);

}  // namespace cospadi
