#include "cospadi/kernels.hpp"

#include <algorithm>
#include <string>

#include "cospadi/error.hpp"
#include "cospadi/parallel.hpp"

namespace cospadi {

namespace {
constexpr std::size_t kRowBlock = 64;
}

std::vector<std::uint32_t> active_atoms(const SparseCodes& codes) {
  std::vector<bool> seen(codes.k(), false);
  for (const auto& col : codes.columns())
    for (auto a : col.support) seen[a] = true;
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i]) out.push_back(static_cast<std::uint32_t>(i));
  return out;
}

KernelResult apply_compressed(const DenseMatrix& x, const Dictionary& d, const SparseCodes& codes) {
  if (x.cols() != d.dim()) {
    throw ShapeError("apply_compressed: X has " + std::to_string(x.cols()) +
                     " columns, dictionary atoms have dimension " + std::to_string(d.dim()));
  }
  if (d.size() != codes.k()) throw ShapeError("apply_compressed: dictionary width != code k");

  const std::size_t n = x.rows();
  const std::size_t d1 = x.cols();
  const std::size_t d2 = codes.cols();
  const auto active = active_atoms(codes);
  const std::size_t ka = active.size();

  // Position of each atom inside the compacted P matrix.
  std::vector<std::size_t> slot(codes.k(), 0);
  for (std::size_t a = 0; a < ka; ++a) slot[active[a]] = a;

  // Active atoms gathered contiguously for the inner-product phase.
  std::vector<double> atoms(ka * d1);
  for (std::size_t a = 0; a < ka; ++a)
    for (std::size_t r = 0; r < d1; ++r) atoms[a * d1 + r] = d.atoms(r, active[a]);

  KernelResult out{DenseMatrix(n, d2), {}};
  const std::size_t blocks = (n + kRowBlock - 1) / kRowBlock;
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t r0 = b * kRowBlock;
    const std::size_t r1 = std::min(n, r0 + kRowBlock);
    std::vector<double> p(ka);
    for (std::size_t i = r0; i < r1; ++i) {
      auto xi = x.row(i);
      for (std::size_t a = 0; a < ka; ++a) {
        const double* atom = atoms.data() + a * d1;
        double acc = 0.0;
        for (std::size_t r = 0; r < d1; ++r) acc += xi[r] * atom[r];
        p[a] = acc;
      }
      auto yi = out.y.row(i);
      for (std::size_t j = 0; j < d2; ++j) {
        const auto& col = codes.column(j);
        double acc = 0.0;
        for (std::size_t q = 0; q < col.nnz(); ++q) acc += col.values[q] * p[slot[col.support[q]]];
        yi[j] = acc;
      }
    }
  });

  auto& c = out.count;
  c.k_active = ka;
  c.inner_product_mults = static_cast<std::uint64_t>(n) * d1 * ka;
  c.combination_mults = static_cast<std::uint64_t>(n) * codes.nnz();
  c.total = c.inner_product_mults + c.combination_mults;
  return out;
}

KernelResult apply_lowrank(const DenseMatrix& x, const DenseMatrix& b, const DenseMatrix& c) {
  if (x.cols() != b.rows() || b.cols() != c.rows()) {
    throw ShapeError("apply_lowrank: inner dimensions disagree (" + std::to_string(x.cols()) +
                     " vs " + std::to_string(b.rows()) + ", " + std::to_string(b.cols()) +
                     " vs " + std::to_string(c.rows()) + ")");
  }
  KernelResult out{matmul(matmul(x, b), c), {}};
  const std::uint64_t n = x.rows();
  const std::uint64_t r = b.cols();
  out.count.k_active = r;
  out.count.inner_product_mults = n * x.cols() * r;
  out.count.combination_mults = n * r * c.cols();
  out.count.total = out.count.inner_product_mults + out.count.combination_mults;
  return out;
}

double sparse_reuse_mults(double n, double d1, double k_active, double nnz) {
  return n * d1 * k_active + n * nnz;
}

double lowrank_mults(double n, double d1, double d2, double r) { return n * r * (d1 + d2); }

}  // namespace cospadi
