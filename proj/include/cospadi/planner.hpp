#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace cospadi {

enum class MaskMode { with_mask, no_mask };
enum class PlanKind { sparse, lowrank };

std::string_view to_string(MaskMode m);
MaskMode parse_mask_mode(std::string_view s);

// Concrete factorization sizes for one weight matrix (or one group of
// matrices sharing a dictionary, in which case d2 is the concatenated width
// d2_per_layer * group_size).
struct SizingPlan {
  PlanKind kind = PlanKind::sparse;
  std::size_t d1 = 0;
  std::size_t d2 = 0;
  std::size_t group_size = 1;
  double gamma_target = 0.0;
  double rho = 2.0;
  MaskMode mask_mode = MaskMode::with_mask;
  std::size_t k = 0;  // sparse: dictionary atoms
  std::size_t s = 0;  // sparse: nonzeros per code column
  std::size_t r = 0;  // low-rank rank (the twin at equal gamma for sparse plans)
  double gamma_achieved = 0.0;
  std::uint64_t stored_words = 0;  // 16-bit words of payload

  friend bool operator==(const SizingPlan&, const SizingPlan&) = default;
};

// Sparse-dictionary sizing at target ratio gamma and k/s ratio rho.
//   with_mask: k_real = (1−γ)d1d2 / (d1 + d2/ρ + d2/16)
//   no_mask:   k_real = (1−γ)d1d2 / (d1 + d2/ρ)
// then s = floor(k_real/ρ) and k = floor(ρ·s). Throws BudgetTooSmall when
// s floors to zero, InvalidConfig on out-of-range gamma/rho.
SizingPlan plan_sparse(std::size_t d1, std::size_t d2, double gamma, double rho, MaskMode mode);

// Shared-dictionary sizing for group_size layers of shape d1 x d2_per_layer.
// The dictionary is paid once and sized against the concatenated width.
SizingPlan plan_group(std::size_t d1, std::size_t d2_per_layer, std::size_t group_size,
                      double gamma, double rho, MaskMode mode);

// r = floor((1−γ)d1d2 / (d1+d2)).
SizingPlan plan_lowrank(std::size_t d1, std::size_t d2, double gamma);

// Exact 16-bit word counts.
std::uint64_t mask_words(std::size_t k, std::size_t d2);
std::uint64_t sparse_words(std::size_t d1, std::size_t d2, std::size_t k, std::uint64_t nnz,
                           MaskMode mode);
double sparse_ratio(std::size_t d1, std::size_t d2, std::size_t k, std::uint64_t nnz,
                    MaskMode mode);

// Payload bytes (2 per stored word), container header excluded.
std::uint64_t account_bytes(const SizingPlan& plan);

// Un-floored sizes, for budget identities that flooring would perturb.
struct RealSizes {
  double k = 0.0;
  double s = 0.0;
  double r = 0.0;
};
RealSizes real_sizes(double d1, double d2, double gamma, double rho, MaskMode mode);

}  // namespace cospadi
