#pragma once

#include <string>
#include <vector>

#include "cospadi/factorizer.hpp"
#include "cospadi/report.hpp"

namespace cospadi {

// Layers of identical shape that share one dictionary.
struct LayerGroup {
  std::string id;
  std::vector<std::string> names;
  std::vector<DenseMatrix> weights;      // each d1 x d2
  std::vector<DenseMatrix> calibration;  // each N x d1

  std::size_t group_size() const noexcept { return weights.size(); }
  // Throws GroupShapeError on empty or heterogeneous groups.
  void validate() const;
};

struct GroupResult {
  // Factorization of the concatenated problem: W_G ≈ D_a·S_G.
  CompressedFactorization combined;
  // S_G split back into per-layer column blocks, in member order.
  std::vector<SparseCodes> slices;
  // One row per member, errors measured against that member's own X.
  std::vector<RunRow> rows;

  // Shared dictionary with one member's codes, shaped like a single layer.
  CompressedFactorization layer(std::size_t i) const;
};

// W_G = [W_1 … W_G], X_G = [X_1; …; X_G]; one whitener and one K-SVD run on
// the stacked problem. The plan must be sized for (d1, d2·group_size).
GroupResult compress_group(const LayerGroup& group, const SizingPlan& plan,
                           const CompressOptions& options = {});

}  // namespace cospadi
