#include "cospadi/planner.hpp"

#include <cmath>
#include <string>

#include "cospadi/error.hpp"

namespace cospadi {

namespace {

// Guards floor() against a quotient that is mathematically integral but
// lands one ulp below it.
std::size_t safe_floor(double x) {
  if (!(x > 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(x * (1.0 + 1e-12)));
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw InvalidConfig("compression ratio gamma must lie in (0, 1), got " + std::to_string(gamma));
}

void check_dims(std::size_t d1, std::size_t d2) {
  if (d1 == 0 || d2 == 0) throw InvalidConfig("matrix dimensions must be positive");
}

}  // namespace

std::string_view to_string(MaskMode m) { return m == MaskMode::with_mask ? "with_mask" : "no_mask"; }

MaskMode parse_mask_mode(std::string_view s) {
  if (s == "with_mask" || s == "with-mask") return MaskMode::with_mask;
  if (s == "no_mask" || s == "no-mask") return MaskMode::no_mask;
  throw InvalidConfig("unknown mask mode '" + std::string(s) + "'");
}

std::uint64_t mask_words(std::size_t k, std::size_t d2) {
  const std::uint64_t bits = static_cast<std::uint64_t>(k) * d2;
  return (bits + 15) / 16;
}

std::uint64_t sparse_words(std::size_t d1, std::size_t d2, std::size_t k, std::uint64_t nnz,
                           MaskMode mode) {
  std::uint64_t words = static_cast<std::uint64_t>(d1) * k + nnz;
  if (mode == MaskMode::with_mask) words += mask_words(k, d2);
  return words;
}

double sparse_ratio(std::size_t d1, std::size_t d2, std::size_t k, std::uint64_t nnz,
                    MaskMode mode) {
  return 1.0 - static_cast<double>(sparse_words(d1, d2, k, nnz, mode)) /
                   (static_cast<double>(d1) * static_cast<double>(d2));
}

RealSizes real_sizes(double d1, double d2, double gamma, double rho, MaskMode mode) {
  const double denom = d1 + d2 / rho + (mode == MaskMode::with_mask ? d2 / 16.0 : 0.0);
  RealSizes out;
  out.k = (1.0 - gamma) * d1 * d2 / denom;
  out.s = out.k / rho;
  out.r = (1.0 - gamma) * d1 * d2 / (d1 + d2);
  return out;
}

SizingPlan plan_sparse(std::size_t d1, std::size_t d2, double gamma, double rho, MaskMode mode) {
  check_dims(d1, d2);
  check_gamma(gamma);
  if (!(rho >= 1.0) || !std::isfinite(rho))
    throw InvalidConfig("k/s ratio rho must be >= 1, got " + std::to_string(rho));

  const auto real = real_sizes(static_cast<double>(d1), static_cast<double>(d2), gamma, rho, mode);
  const std::size_t s = safe_floor(real.s);
  const std::size_t k = safe_floor(rho * static_cast<double>(s));
  if (s == 0 || k == 0) {
    throw BudgetTooSmall("budget too small: gamma=" + std::to_string(gamma) +
                         " leaves k_real=" + std::to_string(real.k) + " for " +
                         std::to_string(d1) + "x" + std::to_string(d2));
  }

  SizingPlan plan;
  plan.kind = PlanKind::sparse;
  plan.d1 = d1;
  plan.d2 = d2;
  plan.gamma_target = gamma;
  plan.rho = rho;
  plan.mask_mode = mode;
  plan.k = k;
  plan.s = s;
  plan.r = safe_floor(real.r);
  plan.stored_words = sparse_words(d1, d2, k, static_cast<std::uint64_t>(s) * d2, mode);
  plan.gamma_achieved = 1.0 - static_cast<double>(plan.stored_words) /
                                  (static_cast<double>(d1) * static_cast<double>(d2));
  return plan;
}

SizingPlan plan_group(std::size_t d1, std::size_t d2_per_layer, std::size_t group_size,
                      double gamma, double rho, MaskMode mode) {
  if (group_size == 0) throw InvalidConfig("group size must be positive");
  auto plan = plan_sparse(d1, d2_per_layer * group_size, gamma, rho, mode);
  plan.group_size = group_size;
  return plan;
}

SizingPlan plan_lowrank(std::size_t d1, std::size_t d2, double gamma) {
  check_dims(d1, d2);
  check_gamma(gamma);
  const double r_real = (1.0 - gamma) * static_cast<double>(d1) * static_cast<double>(d2) /
                        static_cast<double>(d1 + d2);
  const std::size_t r = safe_floor(r_real);
  if (r == 0) {
    throw BudgetTooSmall("budget too small: gamma=" + std::to_string(gamma) +
                         " leaves rank " + std::to_string(r_real));
  }
  SizingPlan plan;
  plan.kind = PlanKind::lowrank;
  plan.d1 = d1;
  plan.d2 = d2;
  plan.gamma_target = gamma;
  plan.rho = 0.0;
  plan.r = r;
  plan.stored_words = static_cast<std::uint64_t>(r) * (d1 + d2);
  plan.gamma_achieved = 1.0 - static_cast<double>(plan.stored_words) /
                                  (static_cast<double>(d1) * static_cast<double>(d2));
  return plan;
}

std::uint64_t account_bytes(const SizingPlan& plan) { return 2 * plan.stored_words; }

}  // namespace cospadi
