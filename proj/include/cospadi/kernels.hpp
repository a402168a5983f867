#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cospadi/factorizer.hpp"
#include "cospadi/matrix.hpp"

namespace cospadi {

// Multiplications performed by a factorized product (additions not counted).
struct MultiplyCount {
  std::uint64_t inner_product_mults = 0;
  std::uint64_t combination_mults = 0;
  std::uint64_t total = 0;
  std::uint64_t k_active = 0;
  friend bool operator==(const MultiplyCount&, const MultiplyCount&) = default;
};

struct KernelResult {
  DenseMatrix y;
  MultiplyCount count;
};

// Union of all column supports, ascending.
std::vector<std::uint32_t> active_atoms(const SparseCodes& codes);

// Y = X·D·S with inner-product reuse: P = X·D[:, active] once
// (N·d1·K_active mults), then Y[:, j] = Σ_{i∈Ω_j} S_ij·P[:, i] (N·|Ω_j| mults).
// Row blocks of X run in parallel.
KernelResult apply_compressed(const DenseMatrix& x, const Dictionary& d, const SparseCodes& codes);

// Y = (X·B)·C, N·d1·r + N·r·d2 mults.
KernelResult apply_lowrank(const DenseMatrix& x, const DenseMatrix& b, const DenseMatrix& c);

// Closed-form counts, usable with un-floored (real) sizes.
double sparse_reuse_mults(double n, double d1, double k_active, double nnz);
double lowrank_mults(double n, double d1, double d2, double r);

}  // namespace cospadi
