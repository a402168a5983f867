#include "cospadi/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <charconv>
#include <optional>

#include "cospadi/error.hpp"
#include "cospadi/parallel.hpp"

namespace cospadi {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::cospadi: return "cospadi";
    case Method::svd: return "svd";
    case Method::svd_data_aware: return "svd-data-aware";
  }
  return "cospadi";
}

Method parse_method(std::string_view s) {
  if (s == "cospadi") return Method::cospadi;
  if (s == "svd") return Method::svd;
  if (s == "svd-data-aware" || s == "svd_data_aware") return Method::svd_data_aware;
  throw InvalidConfig("unknown method '" + std::string(s) + "' (cospadi, svd, svd-data-aware)");
}

CompressedFactorization stored_form(const CompressedFactorization& cf, int truncate_bits,
                                    MaskMode mode) {
  auto out = unpack(pack(cf, truncate_bits, mode));
  out.report = cf.report;
  return out;
}

LowRankFactorization stored_form(const LowRankFactorization& f) {
  LowRankFactorization out = f;
  for (double& v : out.b.data()) v = to_double(to_bf16(v));
  for (double& v : out.c.data()) v = to_double(to_bf16(v));
  return out;
}

void add_lowrank_tensors(TensorSet& set, const std::string& name, const LowRankFactorization& f,
                         double gamma_target) {
  set.add(name + ".B", f.b, TensorDtype::bf16);
  set.add(name + ".C", f.c, TensorDtype::bf16);
  set.add(name + ".meta",
          DenseMatrix(1, 2, {gamma_target, f.mode == LowRankMode::data_aware ? 1.0 : 0.0}),
          TensorDtype::f64);
}

std::vector<LowRankArtifact> read_lowrank_tensors(const TensorSet& set) {
  constexpr std::string_view suffix = ".meta";
  std::vector<LowRankArtifact> out;
  for (const auto& t : set.tensors()) {
    if (t.name.size() <= suffix.size() || !t.name.ends_with(suffix)) continue;
    const std::string base = t.name.substr(0, t.name.size() - suffix.size());
    if (t.value.rows() != 1 || t.value.cols() != 2)
      throw IngestError(t.name, "low-rank metadata must be 1x2");
    LowRankArtifact a;
    a.name = base;
    a.gamma_target = t.value(0, 0);
    a.factors.b = set.at(base + ".B");
    a.factors.c = set.at(base + ".C");
    if (a.factors.b.cols() != a.factors.c.rows())
      throw IngestError(base, "low-rank factors disagree on the rank");
    a.factors.r = a.factors.b.cols();
    a.factors.mode = t.value(0, 1) != 0.0 ? LowRankMode::data_aware : LowRankMode::plain;
    out.push_back(std::move(a));
  }
  return out;
}

namespace {

double parse_number(std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v))
    throw InvalidConfig("not a number: '" + std::string(text) + "'");
  return v;
}

// Range endpoints land on clean decimals instead of accumulated float error.
double tidy(double v) { return std::round(v * 1e12) / 1e12; }

}  // namespace

std::vector<double> parse_list(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto piece = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
    if (piece.empty()) throw InvalidConfig("empty entry in list '" + std::string(text) + "'");
    out.push_back(parse_number(piece));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<double> parse_sweep(std::string_view text, std::string_view key) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || text.substr(0, eq) != key)
    throw InvalidConfig("sweep must look like '" + std::string(key) + "=lo:hi:step'");
  const auto body = text.substr(eq + 1);
  if (body.find(':') == std::string_view::npos) return parse_list(body);

  std::vector<double> parts;
  std::size_t pos = 0;
  for (;;) {
    const auto colon = body.find(':', pos);
    parts.push_back(parse_number(body.substr(pos, colon == body.npos ? body.npos : colon - pos)));
    if (colon == body.npos) break;
    pos = colon + 1;
  }
  if (parts.size() != 3) throw InvalidConfig("range sweep needs lo:hi:step");
  const double lo = parts[0], hi = parts[1], step = parts[2];
  if (!(step > 0.0) || hi < lo) throw InvalidConfig("range sweep needs step > 0 and hi >= lo");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(tidy(lo + static_cast<double>(i) * step));
  return out;
}

RunReport run_bench(const BenchConfig& config) {
  if (config.gammas.empty() || config.methods.empty() || config.seeds.empty())
    throw InvalidConfig("bench grid is empty");
  if (config.rhos.empty()) throw InvalidConfig("bench needs at least one rho");

  std::vector<SynthData> data;
  for (auto seed : config.seeds) {
    SynthSpec spec = config.synth;
    spec.seed = seed;
    data.push_back(generate_synthetic(spec));
  }

  struct Cell {
    std::size_t seed_index;
    double gamma;
    Method method;
    double rho;
  };
  std::vector<Cell> cells;
  for (std::size_t si = 0; si < config.seeds.size(); ++si)
    for (double gamma : config.gammas)
      for (Method m : config.methods) {
        if (m == Method::cospadi) {
          for (double rho : config.rhos) cells.push_back({si, gamma, m, rho});
        } else {
          cells.push_back({si, gamma, m, 0.0});
        }
      }

  // Rows are written into their own slot, so order follows the grid.
  std::vector<std::optional<RunRow>> rows(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) {
    const Cell& cell = cells[i];
    const auto& d = data[cell.seed_index];
    const std::uint64_t seed = config.seeds[cell.seed_index];
    std::string name = "seed" + std::to_string(seed);
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    if (cell.method == Method::cospadi) {
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof buf, cell.rho);
      name += "/rho" + std::string(buf, res.ptr);
      const auto plan = plan_sparse(d.w.rows(), d.w.cols(), cell.gamma, cell.rho, config.mask_mode);
      CompressOptions opts = config.compress;
      opts.ksvd.seed = seed;
      const auto cf = compress_layer(d.w, d.x, plan, opts);
      const auto stored = stored_form(cf, config.truncate_bits, config.mask_mode);
      rows[i] = evaluate_sparse(name, "cospadi", d.w, d.x, stored.dictionary, stored.codes, plan,
                                cf.report.iterations_run, elapsed());
    } else {
      const auto plan = plan_lowrank(d.w.rows(), d.w.cols(), cell.gamma);
      const auto f = cell.method == Method::svd
                         ? svd_truncate(d.w, plan.r)
                         : data_aware_lowrank(d.w, d.x, plan.r, config.compress.damping,
                                              config.compress.whiten);
      const auto stored = stored_form(f);
      rows[i] = evaluate_lowrank(name, std::string(to_string(cell.method)), d.w, d.x, stored.b,
                                 stored.c, plan, elapsed());
    }
  });

  RunReport report;
  for (auto& r : rows) report.rows.push_back(std::move(*r));
  return report;
}

}  // namespace cospadi
