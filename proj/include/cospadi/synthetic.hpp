#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "cospadi/matrix.hpp"

namespace cospadi {

enum class SynthKind { shared_subspace, union_of_subspaces, heavy_tailed };

std::string_view to_string(SynthKind k);
SynthKind parse_synth_kind(std::string_view s);

struct SynthSpec {
  SynthKind kind = SynthKind::union_of_subspaces;
  std::size_t d1 = 24;
  std::size_t d2 = 96;
  std::size_t n = 128;          // calibration rows
  std::size_t rank = 3;         // r0: rank of the shared subspace / each subspace
  std::size_t subspaces = 4;    // c: union_of_subspaces only
  double noise = 0.0;           // std-dev of additive entrywise Gaussian noise on W
  double cond = 1.0;            // condition number of X
  double dof = 3.0;             // Student-t degrees of freedom (heavy_tailed)
  std::uint64_t seed = 0;
};

struct SynthData {
  DenseMatrix w;  // d1 x d2
  DenseMatrix x;  // n x d1
  // union_of_subspaces: subspace index of each column and the orthonormal bases.
  std::vector<std::size_t> labels;
  std::vector<DenseMatrix> bases;
};

// Weights follow the requested structure with roughly unit-variance entries;
// X = U·diag(σ)·Vᵀ·sqrt(n) with random orthonormal U, V and σ geometric
// from 1 down to 1/cond. Throws InvalidConfig on inconsistent parameters.
SynthData generate_synthetic(const SynthSpec& spec);

DenseMatrix random_gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
DenseMatrix random_orthonormal(std::size_t rows, std::size_t cols, std::mt19937_64& rng);
DenseMatrix calibration_with_condition(std::size_t n, std::size_t d1, double cond,
                                       std::mt19937_64& rng);

}  // namespace cospadi
