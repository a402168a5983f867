#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cospadi/factorizer.hpp"
#include "cospadi/matrix.hpp"
#include "cospadi/planner.hpp"

namespace cospadi {

// One compressed unit (a layer, or one layer of a group) in a run report.
struct RunRow {
  std::string name;
  std::string method;
  double gamma_target = 0.0;
  double gamma_achieved = 0.0;
  std::size_t k = 0;       // dictionary atoms; 0 for low-rank rows
  std::size_t s_or_r = 0;  // sparsity s, or rank r for low-rank rows
  double activation_error_fro = 0.0;
  double relative_activation_error = 0.0;
  double weight_error_fro = 0.0;
  std::size_t k_active = 0;
  std::uint64_t multiply_count = 0;
  int iterations = 0;
  double wall_seconds = 0.0;

  friend bool operator==(const RunRow&, const RunRow&) = default;
};

struct RunReport {
  std::vector<RunRow> rows;

  static const std::vector<std::string>& csv_columns();
  std::string to_csv() const;
  std::string to_json() const;
  // Writes <prefix>.csv and <prefix>.json.
  void write(const std::filesystem::path& prefix) const;
};

std::string csv_header();
std::string csv_line(const RunRow& row);

// Rows evaluated by running the inference kernels on X, so the activation
// error and the multiply count come from the same computation.
RunRow evaluate_sparse(const std::string& name, const std::string& method, const DenseMatrix& w,
                       const DenseMatrix& x, const Dictionary& d, const SparseCodes& codes,
                       const SizingPlan& plan, int iterations, double wall_seconds);
RunRow evaluate_lowrank(const std::string& name, const std::string& method, const DenseMatrix& w,
                        const DenseMatrix& x, const DenseMatrix& b, const DenseMatrix& c,
                        const SizingPlan& plan, double wall_seconds);

}  // namespace cospadi
