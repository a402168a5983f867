#include "cospadi/synthetic.hpp"

#include <cmath>
#include <string>

#include "cospadi/error.hpp"
#include "cospadi/linalg.hpp"

namespace cospadi {

std::string_view to_string(SynthKind k) {
  switch (k) {
    case SynthKind::shared_subspace: return "shared_subspace";
    case SynthKind::union_of_subspaces: return "union_of_subspaces";
    case SynthKind::heavy_tailed: return "heavy_tailed";
  }
  return "union_of_subspaces";
}

SynthKind parse_synth_kind(std::string_view s) {
  if (s == "shared_subspace" || s == "shared") return SynthKind::shared_subspace;
  if (s == "union_of_subspaces" || s == "union") return SynthKind::union_of_subspaces;
  if (s == "heavy_tailed" || s == "heavy") return SynthKind::heavy_tailed;
  throw InvalidConfig("unknown synthetic kind '" + std::string(s) + "'");
}

DenseMatrix random_gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DenseMatrix m(rows, cols);
  for (double& v : m.data()) v = normal(rng);
  return m;
}

DenseMatrix random_orthonormal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  for (;;) {
    try {
      return linalg::orthonormalize_columns(random_gaussian(rows, cols, rng));
    } catch (const RankDeficient&) {
      // Probability zero for Gaussian draws; redraw.
    }
  }
}

DenseMatrix calibration_with_condition(std::size_t n, std::size_t d1, double cond,
                                       std::mt19937_64& rng) {
  if (n < d1) throw InvalidConfig("calibration needs n >= d1 for a prescribed condition number");
  if (!(cond >= 1.0) || !std::isfinite(cond)) throw InvalidConfig("condition number must be >= 1");
  const DenseMatrix u = random_orthonormal(n, d1, rng);
  const DenseMatrix v = random_orthonormal(d1, d1, rng);
  DenseMatrix scaled = u;
  const double root_n = std::sqrt(static_cast<double>(n));
  for (std::size_t j = 0; j < d1; ++j) {
    const double t = d1 > 1 ? static_cast<double>(j) / static_cast<double>(d1 - 1) : 0.0;
    const double sigma = root_n * std::pow(cond, -t);
    for (std::size_t i = 0; i < n; ++i) scaled(i, j) *= sigma;
  }
  return matmul(scaled, v.transpose());
}

SynthData generate_synthetic(const SynthSpec& spec) {
  if (spec.d1 == 0 || spec.d2 == 0 || spec.n == 0)
    throw InvalidConfig("synthetic dimensions must be positive");
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise))
    throw InvalidConfig("noise must be a finite non-negative number");

  std::mt19937_64 rng(spec.seed);
  SynthData out;
  out.w = DenseMatrix(spec.d1, spec.d2);

  switch (spec.kind) {
    case SynthKind::shared_subspace: {
      if (spec.rank < 1 || spec.rank > std::min(spec.d1, spec.d2))
        throw InvalidConfig("shared_subspace rank must lie in [1, min(d1, d2)]");
      DenseMatrix b = random_gaussian(spec.d1, spec.rank, rng);
      b *= 1.0 / std::sqrt(static_cast<double>(spec.rank));
      out.w = matmul(b, random_gaussian(spec.rank, spec.d2, rng));
      break;
    }
    case SynthKind::union_of_subspaces: {
      if (spec.subspaces < 1) throw InvalidConfig("union_of_subspaces needs at least one subspace");
      if (spec.rank < 1 || spec.rank > spec.d1)
        throw InvalidConfig("union_of_subspaces rank must lie in [1, d1]");
      if (spec.subspaces * spec.rank > spec.d1)
        throw InvalidConfig("union_of_subspaces needs subspaces * rank <= d1 for independent subspaces");
      for (std::size_t c = 0; c < spec.subspaces; ++c)
        out.bases.push_back(random_orthonormal(spec.d1, spec.rank, rng));
      std::normal_distribution<double> normal(0.0, 1.0);
      const double scale = std::sqrt(static_cast<double>(spec.d1) / static_cast<double>(spec.rank));
      out.labels.resize(spec.d2);
      for (std::size_t j = 0; j < spec.d2; ++j) {
        const std::size_t c = j % spec.subspaces;
        out.labels[j] = c;
        std::vector<double> z(spec.rank);
        for (double& e : z) e = normal(rng) * scale;
        for (std::size_t i = 0; i < spec.d1; ++i) {
          double acc = 0.0;
          for (std::size_t q = 0; q < spec.rank; ++q) acc += out.bases[c](i, q) * z[q];
          out.w(i, j) = acc;
        }
      }
      break;
    }
    case SynthKind::heavy_tailed: {
      if (!(spec.dof > 0.0)) throw InvalidConfig("heavy_tailed needs dof > 0");
      std::student_t_distribution<double> t(spec.dof);
      for (double& v : out.w.data()) v = t(rng);
      break;
    }
  }

  if (spec.noise > 0.0) {
    std::normal_distribution<double> normal(0.0, spec.noise);
    for (double& v : out.w.data()) v += normal(rng);
  }
  out.x = calibration_with_condition(spec.n, spec.d1, spec.cond, rng);
  return out;
}

}  // namespace cospadi
