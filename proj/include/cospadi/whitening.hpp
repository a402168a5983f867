#pragma once

#include <cstddef>
#include <string_view>

#include "cospadi/matrix.hpp"

namespace cospadi {

enum class WhitenMethod { qr, cholesky };

std::string_view to_string(WhitenMethod m);
WhitenMethod parse_whiten_method(std::string_view s);

// Upper-triangular L with (X L⁻¹)ᵀ(X L⁻¹) = I for full-rank calibration X.
// Moving the activation objective ‖XW − XDS‖ through L turns it into the
// plain Frobenius objective ‖LW − LD·S‖.
class WhitenTransform {
 public:
  WhitenTransform(DenseMatrix l, WhitenMethod method, double damping, std::size_t source_rows);

  const DenseMatrix& matrix() const noexcept { return l_; }
  WhitenMethod method() const noexcept { return method_; }
  double damping() const noexcept { return damping_; }
  std::size_t source_rows() const noexcept { return source_rows_; }
  std::size_t dim() const noexcept { return l_.rows(); }

  // X·L⁻¹ via a triangular solve.
  DenseMatrix whiten_inputs(const DenseMatrix& x) const;

 private:
  DenseMatrix l_;
  WhitenMethod method_;
  double damping_;
  std::size_t source_rows_;
};

// damping λ > 0 regularizes the Gram matrix as XᵀX + λ·mean(diag(XᵀX))·I.
// With λ = 0 a rank-deficient X raises RankDeficient.
WhitenTransform fit_whitener(const DenseMatrix& x, WhitenMethod method = WhitenMethod::cholesky,
                             double damping = 0.0);

// W_L = L·W
DenseMatrix whiten_weights(const WhitenTransform& t, const DenseMatrix& w);

// D_a = L⁻¹·D_L
DenseMatrix dewhiten_dictionary(const WhitenTransform& t, const DenseMatrix& d_l);

// XᵀX accumulated over row blocks.
DenseMatrix gram_blocked(const DenseMatrix& x, std::size_t block_rows = 256);

}  // namespace cospadi
