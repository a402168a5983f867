#include "cospadi/cli.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "cospadi/error.hpp"
#include "cospadi/group.hpp"
#include "cospadi/pipeline.hpp"

namespace cospadi {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr std::string_view kCalibSuffix = ".calib";

bool is_calibration_name(const std::string& name) { return name.ends_with(kCalibSuffix); }

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto next = text.find(sep, pos);
    out.push_back(text.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

// Weights and calibration may come from the same file: the calibration for
// layer "w" is the tensor "w.calib", or "w" itself in a separate calibration
// file, or the only calibration tensor present.
struct Inputs {
  TensorSet weights;
  TensorSet calib;
  bool same_file = false;

  std::vector<std::string> layers() const {
    std::vector<std::string> out;
    for (const auto& t : weights.tensors())
      if (!is_calibration_name(t.name)) out.push_back(t.name);
    return out;
  }

  const DenseMatrix& weight(const std::string& name) const {
    if (is_calibration_name(name)) throw InvalidConfig("'" + name + "' is a calibration tensor");
    return weights.at(name);
  }

  const DenseMatrix& calibration(const std::string& layer) const {
    if (const auto* t = calib.find(layer + std::string(kCalibSuffix))) return t->value;
    if (!same_file) {
      if (const auto* t = calib.find(layer)) return t->value;
      if (calib.size() == 1) return calib.tensors().front().value;
    }
    const NamedTensor* only = nullptr;
    std::size_t count = 0;
    for (const auto& t : calib.tensors()) {
      if (is_calibration_name(t.name)) {
        only = &t;
        ++count;
      }
    }
    if (count == 1) return only->value;
    throw IngestError(layer, "no calibration tensor found (expected '" + layer +
                                 std::string(kCalibSuffix) + "')");
  }
};

Inputs load_inputs(const std::string& weights_path, const std::string& calib_path) {
  Inputs in;
  in.weights = ingest_tensors(weights_path);
  in.same_file = calib_path.empty() || calib_path == weights_path ||
                 (fs::exists(calib_path) && fs::equivalent(fs::path(weights_path), fs::path(calib_path)));
  in.calib = in.same_file ? in.weights : ingest_tensors(calib_path);
  return in;
}

bool has_magic(const std::vector<std::uint8_t>& bytes, const char (&magic)[8]) {
  return bytes.size() >= 8 && std::equal(magic, magic + 8, bytes.begin());
}

std::vector<RunRow> evaluate_container(const PackedFactorization& packed, const Inputs& in,
                                       int iterations, double wall_seconds) {
  const auto cf = unpack(packed);
  std::vector<std::string> members = packed.group.members;
  std::vector<std::size_t> widths = packed.group.layer_cols;
  if (members.empty()) {
    const auto layers = in.layers();
    if (layers.size() != 1)
      throw DataError("container names no layers and the weights file holds " +
                      std::to_string(layers.size()) + " layers");
    members = layers;
    widths = {cf.codes.cols()};
  }
  std::vector<RunRow> rows;
  std::size_t first = 0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto slice = cf.codes.slice_columns(first, widths[i]);
    first += widths[i];
    rows.push_back(evaluate_sparse(members[i], "cospadi", in.weight(members[i]),
                                   in.calibration(members[i]), cf.dictionary, slice, cf.plan,
                                   iterations, wall_seconds));
  }
  return rows;
}

std::vector<RunRow> evaluate_lowrank_set(const TensorSet& set, const Inputs& in,
                                         double wall_seconds) {
  std::vector<RunRow> rows;
  for (const auto& a : read_lowrank_tensors(set)) {
    const auto& w = in.weight(a.name);
    const auto plan = plan_lowrank(w.rows(), w.cols(), a.gamma_target);
    const auto method = a.factors.mode == LowRankMode::data_aware ? Method::svd_data_aware : Method::svd;
    rows.push_back(evaluate_lowrank(a.name, std::string(to_string(method)), w,
                                    in.calibration(a.name), a.factors.b, a.factors.c, plan,
                                    wall_seconds));
  }
  if (rows.empty()) throw DataError("tensor file holds no low-rank factorizations");
  return rows;
}

fs::path unit_path(const fs::path& out, const std::string& unit, std::size_t units) {
  if (units == 1) return out;
  return out.parent_path() / (out.stem().string() + "." + unit + out.extension().string());
}

fs::path default_report_prefix(const fs::path& out) { return out.parent_path() / out.stem(); }

struct KsvdFlags {
  int iters = 60;
  int power_iters = 8;
  std::string init = "column_sample";
  std::uint64_t seed = 0;
  double tolerance = 1e-7;
  double damping = 0.0;
  std::string whiten = "cholesky";

  // bench seeds K-SVD from the grid seed, so it goes without --seed.
  void attach(CLI::App* cmd, bool with_seed = true) {
    cmd->add_option("--iters", iters, "K-SVD iterations")->capture_default_str();
    cmd->add_option("--power-iters", power_iters, "power iterations per atom update")->capture_default_str();
    cmd->add_option("--init", init, "column_sample | gaussian | svd_based")->capture_default_str();
    if (with_seed) cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    cmd->add_option("--tolerance", tolerance, "early-stop relative improvement")->capture_default_str();
    cmd->add_option("--damping", damping, "ridge added to the calibration Gram (try 1e-6)")->capture_default_str();
    cmd->add_option("--whiten", whiten, "cholesky | qr")->capture_default_str();
  }

  CompressOptions options() const {
    CompressOptions o;
    o.ksvd.iters = iters;
    o.ksvd.power_iters = power_iters;
    o.ksvd.init = parse_init_method(init);
    o.ksvd.seed = seed;
    o.ksvd.tolerance = tolerance;
    o.damping = damping;
    o.whiten = parse_whiten_method(whiten);
    return o;
  }
};

struct SynthFlags {
  std::string kind = "union_of_subspaces";
  std::size_t d1 = 24;
  std::size_t d2 = 96;
  std::size_t n = 128;
  std::size_t rank = 3;
  std::size_t subspaces = 4;
  double noise = 0.0;
  double cond = 1.0;
  double dof = 3.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--kind", kind, "shared_subspace | union_of_subspaces | heavy_tailed")->capture_default_str();
    cmd->add_option("--d1", d1, "weight rows (input features)")->capture_default_str();
    cmd->add_option("--d2", d2, "weight columns (output features)")->capture_default_str();
    cmd->add_option("--n", n, "calibration rows")->capture_default_str();
    cmd->add_option("--rank", rank, "subspace dimension r0")->capture_default_str();
    cmd->add_option("--subspaces", subspaces, "number of subspaces c")->capture_default_str();
    cmd->add_option("--noise", noise, "entrywise Gaussian noise std-dev")->capture_default_str();
    cmd->add_option("--cond", cond, "condition number of the calibration matrix")->capture_default_str();
    cmd->add_option("--dof", dof, "Student-t degrees of freedom")->capture_default_str();
  }

  SynthSpec spec(std::uint64_t seed) const {
    SynthSpec s;
    s.kind = parse_synth_kind(kind);
    s.d1 = d1;
    s.d2 = d2;
    s.n = n;
    s.rank = rank;
    s.subspaces = subspaces;
    s.noise = noise;
    s.cond = cond;
    s.dof = dof;
    s.seed = seed;
    return s;
  }
};

// ---- plan ----------------------------------------------------------------

struct PlanCmd {
  std::size_t d1 = 0, d2 = 0, group_size = 1;
  double gamma = 0.0, rho = 2.0;
  std::string mode = "with_mask";
  std::string method = "cospadi";

  int run(std::ostream& out) const {
    SizingPlan plan;
    if (method == "cospadi") {
      plan = plan_group(d1, d2, group_size, gamma, rho, parse_mask_mode(mode));
    } else if (method == "lowrank" || method == "svd" || method == "svd-data-aware") {
      if (group_size != 1) throw InvalidConfig("low-rank plans do not share across layers");
      plan = plan_lowrank(d1, d2, gamma);
    } else {
      throw InvalidConfig("unknown plan method '" + method + "' (cospadi, lowrank)");
    }
    nlohmann::ordered_json j = {
        {"kind", plan.kind == PlanKind::sparse ? "sparse" : "lowrank"},
        {"d1", plan.d1},
        {"d2", plan.d2},
        {"group_size", plan.group_size},
        {"gamma_target", plan.gamma_target},
        {"rho", plan.rho},
        {"mask_mode", std::string(to_string(plan.mask_mode))},
        {"k", plan.k},
        {"s", plan.s},
        {"r", plan.r},
        {"gamma_achieved", plan.gamma_achieved},
        {"stored_words", plan.stored_words},
        {"payload_bytes", account_bytes(plan)}};
    out << j.dump(2) << '\n';
    return kExitOk;
  }
};

// ---- compress ------------------------------------------------------------

struct CompressCmd {
  std::string weights, calib, out, report;
  double gamma = 0.0, rho = 2.0;
  std::string method = "cospadi";
  std::string mask_mode = "with_mask";
  int truncate_bits = 0;
  std::vector<std::string> groups;
  KsvdFlags ksvd;

  int run(std::ostream& os) const {
    const Method m = parse_method(method);
    const MaskMode mode = parse_mask_mode(mask_mode);
    const CompressOptions opts = ksvd.options();
    if (truncate_bits < 0 || truncate_bits > 7) throw InvalidConfig("--truncate-bits must be in [0, 7]");
    const Inputs in = load_inputs(weights, calib);
    const auto layers = in.layers();
    if (layers.empty()) throw DataError("weights file '" + weights + "' holds no weight tensors");

    // Units in file order of their first member; layers not named in a
    // group form singleton units.
    std::vector<std::vector<std::string>> units;
    std::set<std::string> grouped;
    std::vector<std::vector<std::string>> requested;
    for (const auto& g : groups) {
      auto members = split(g, ',');
      for (const auto& name : members) {
        if (name.empty()) throw InvalidConfig("empty layer name in --group '" + g + "'");
        in.weight(name);
        if (!grouped.insert(name).second)
          throw InvalidConfig("layer '" + name + "' appears in more than one group");
      }
      requested.push_back(std::move(members));
    }
    if (m != Method::cospadi) {
      for (const auto& g : requested)
        if (g.size() > 1) throw InvalidConfig("--group is only supported for --method cospadi");
    }
    for (const auto& name : layers) {
      if (!grouped.contains(name)) {
        units.push_back({name});
        continue;
      }
      for (const auto& g : requested)
        if (g.front() == name) units.push_back(g);
    }
    // Groups whose first member is listed after a later member still appear once.
    for (const auto& g : requested) {
      bool placed = false;
      for (const auto& u : units) placed = placed || u == g;
      if (!placed) units.push_back(g);
    }

    RunReport rep;
    const fs::path out_path(out);
    if (m == Method::cospadi) {
      for (const auto& unit : units) {
        LayerGroup group;
        for (std::size_t i = 0; i < unit.size(); ++i) {
          group.id += (i ? "+" : "") + unit[i];
          group.names.push_back(unit[i]);
          group.weights.push_back(in.weight(unit[i]));
          group.calibration.push_back(in.calibration(unit[i]));
        }
        group.validate();
        const auto& w0 = group.weights.front();
        const auto start = Clock::now();
        const auto plan = plan_group(w0.rows(), w0.cols(), group.group_size(), gamma, rho, mode);
        const auto result = compress_group(group, plan, opts);
        const double wall = seconds_since(start);

        auto packed = pack(result.combined, truncate_bits, mode);
        packed.group.members = group.names;
        packed.group.layer_cols.assign(group.group_size(), w0.cols());
        const auto bytes = serialize(packed);
        write_file_bytes(unit_path(out_path, group.id, units.size()), bytes);
        // Rows come from the bytes just written, exactly what eval will read.
        for (auto& row : evaluate_container(deserialize(bytes), in,
                                            result.combined.report.iterations_run, wall))
          rep.rows.push_back(std::move(row));
      }
    } else {
      TensorSet set;
      std::vector<double> walls;
      for (const auto& unit : units) {
        const auto& name = unit.front();
        const auto& w = in.weight(name);
        const auto start = Clock::now();
        const auto plan = plan_lowrank(w.rows(), w.cols(), gamma);
        const auto f = m == Method::svd
                           ? svd_truncate(w, plan.r)
                           : data_aware_lowrank(w, in.calibration(name), plan.r, opts.damping,
                                                opts.whiten);
        walls.push_back(seconds_since(start));
        add_lowrank_tensors(set, name, f, gamma);
      }
      const auto bytes = encode_tensors(set);
      write_file_bytes(out_path, bytes);
      rep.rows = evaluate_lowrank_set(decode_tensors(bytes), in, 0.0);
      for (std::size_t i = 0; i < rep.rows.size(); ++i) rep.rows[i].wall_seconds = walls[i];
    }

    rep.write(report.empty() ? default_report_prefix(out_path) : fs::path(report));
    os << rep.to_csv();
    return kExitOk;
  }
};

// ---- eval ----------------------------------------------------------------

struct EvalCmd {
  std::string weights, calib, report;
  std::vector<std::string> compressed;

  int run(std::ostream& os) const {
    const Inputs in = load_inputs(weights, calib);
    RunReport rep;
    for (const auto& path : compressed) {
      const auto start = Clock::now();
      const auto bytes = read_file_bytes(path);
      std::vector<RunRow> rows;
      if (has_magic(bytes, kCospadiMagic)) {
        rows = evaluate_container(deserialize(bytes), in, 0, 0.0);
      } else if (has_magic(bytes, kTensorMagic)) {
        rows = evaluate_lowrank_set(decode_tensors(bytes), in, 0.0);
      } else {
        throw NotACospadiFile("'" + path + "' is neither a .cospadi container nor a tensor file");
      }
      const double wall = seconds_since(start);
      for (auto& r : rows) {
        r.wall_seconds = wall;
        rep.rows.push_back(std::move(r));
      }
    }
    if (!report.empty()) rep.write(report);
    os << rep.to_csv();
    return kExitOk;
  }
};

// ---- synth ---------------------------------------------------------------

struct SynthCmd {
  SynthFlags flags;
  std::uint64_t seed = 0;
  std::size_t layers = 1;
  std::string dtype = "f64";
  std::string out;

  int run(std::ostream& os) const {
    if (layers == 0) throw InvalidConfig("--layers must be positive");
    const TensorDtype t = parse_dtype(dtype);
    TensorSet set;
    for (std::size_t i = 0; i < layers; ++i) {
      const auto data = generate_synthetic(flags.spec(seed + i));
      const std::string name = "layer" + std::to_string(i);
      set.add(name, data.w, t);
      set.add(name + std::string(kCalibSuffix), data.x, t);
    }
    write_tensors(out, set);
    os << "wrote " << layers << " layer(s) to " << out << '\n';
    return kExitOk;
  }
};

// ---- bench ---------------------------------------------------------------

struct BenchCmd {
  SynthFlags flags;
  KsvdFlags ksvd;
  std::string sweep = "gamma=0.2:0.5:0.1";
  std::string rho_list = "2";
  std::string methods = "cospadi,svd-data-aware";
  std::size_t seeds = 5;
  std::uint64_t seed_base = 0;
  std::string mask_mode = "no_mask";
  int truncate_bits = 0;
  std::string out;

  int run(std::ostream& os) const {
    BenchConfig cfg;
    cfg.synth = flags.spec(0);
    cfg.gammas = parse_sweep(sweep, "gamma");
    cfg.rhos = parse_list(rho_list);
    cfg.methods.clear();
    for (const auto& m : split(methods, ',')) cfg.methods.push_back(parse_method(m));
    if (seeds == 0) throw InvalidConfig("--seeds must be positive");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < seeds; ++i) cfg.seeds.push_back(seed_base + i);
    cfg.mask_mode = parse_mask_mode(mask_mode);
    if (truncate_bits < 0 || truncate_bits > 7) throw InvalidConfig("--truncate-bits must be in [0, 7]");
    cfg.truncate_bits = truncate_bits;
    cfg.compress = ksvd.options();
    const auto rep = run_bench(cfg);
    if (!out.empty()) rep.write(out);
    os << rep.to_csv();
    return kExitOk;
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse-dictionary compression of linear layers", "cospadi"};
  app.require_subcommand(1);

  PlanCmd plan;
  auto* plan_cmd = app.add_subcommand("plan", "print the sizing plan for a layer shape as JSON");
  plan_cmd->add_option("--d1", plan.d1, "weight rows")->required();
  plan_cmd->add_option("--d2", plan.d2, "weight columns (per layer)")->required();
  plan_cmd->add_option("--gamma", plan.gamma, "target compression ratio in (0, 1)")->required();
  plan_cmd->add_option("--rho", plan.rho, "k/s ratio")->capture_default_str();
  plan_cmd->add_option("--mode", plan.mode, "with_mask | no_mask")->capture_default_str();
  plan_cmd->add_option("--method", plan.method, "cospadi | lowrank")->capture_default_str();
  plan_cmd->add_option("--group-size", plan.group_size, "layers sharing one dictionary")->capture_default_str();

  CompressCmd compress;
  auto* compress_cmd = app.add_subcommand("compress", "compress weight tensors and write artifacts");
  compress_cmd->add_option("--weights", compress.weights, "tensor file with weights")->required();
  compress_cmd->add_option("--calib", compress.calib, "tensor file with calibration inputs (default: --weights)");
  compress_cmd->add_option("--gamma", compress.gamma, "target compression ratio")->required();
  compress_cmd->add_option("--rho", compress.rho, "k/s ratio")->capture_default_str();
  compress_cmd->add_option("--method", compress.method, "cospadi | svd | svd-data-aware")->capture_default_str();
  compress_cmd->add_option("--mask-mode", compress.mask_mode, "with_mask | no_mask")->capture_default_str();
  compress_cmd->add_option("--truncate-bits", compress.truncate_bits, "mantissa bits cleared from code values")->capture_default_str();
  compress_cmd->add_option("--group", compress.groups, "comma-separated layers sharing one dictionary (repeatable)");
  compress_cmd->add_option("--out", compress.out, "output artifact path")->required();
  compress_cmd->add_option("--report", compress.report, "report prefix (default: --out without extension)");
  compress.ksvd.attach(compress_cmd);

  EvalCmd eval;
  auto* eval_cmd = app.add_subcommand("eval", "recompute errors and multiply counts from artifacts");
  eval_cmd->add_option("--weights", eval.weights, "tensor file with weights")->required();
  eval_cmd->add_option("--calib", eval.calib, "tensor file with calibration inputs (default: --weights)");
  eval_cmd->add_option("--compressed", eval.compressed, "artifact written by compress (repeatable)")->required();
  eval_cmd->add_option("--report", eval.report, "report prefix");

  SynthCmd synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic weight/calibration tensor file");
  synth.flags.attach(synth_cmd);
  synth_cmd->add_option("--seed", synth.seed, "random seed")->capture_default_str();
  synth_cmd->add_option("--layers", synth.layers, "number of layers (seeds seed, seed+1, ...)")->capture_default_str();
  synth_cmd->add_option("--dtype", synth.dtype, "f32 | f64 | bf16")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "output tensor file")->required();

  BenchCmd bench;
  bench.flags.noise = 0.01;
  bench.flags.cond = 10.0;
  auto* bench_cmd = app.add_subcommand("bench", "run the method comparison grid on synthetic data");
  bench.flags.attach(bench_cmd);
  bench.ksvd.attach(bench_cmd, false);
  bench_cmd->add_option("--sweep", bench.sweep, "gamma=lo:hi:step or gamma=a,b,c")->capture_default_str();
  bench_cmd->add_option("--rho-list", bench.rho_list, "comma-separated k/s ratios")->capture_default_str();
  bench_cmd->add_option("--methods", bench.methods, "comma-separated methods")->capture_default_str();
  bench_cmd->add_option("--seeds", bench.seeds, "number of seeds")->capture_default_str();
  bench_cmd->add_option("--seed-base", bench.seed_base, "first seed")->capture_default_str();
  bench_cmd->add_option("--mask-mode", bench.mask_mode, "with_mask | no_mask")->capture_default_str();
  bench_cmd->add_option("--truncate-bits", bench.truncate_bits, "mantissa bits cleared from code values")->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "report prefix (<out>.csv, <out>.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (plan_cmd->parsed()) return plan.run(out);
    if (compress_cmd->parsed()) return compress.run(out);
    if (eval_cmd->parsed()) return eval.run(out);
    if (synth_cmd->parsed()) return synth.run(out);
    if (bench_cmd->parsed()) return bench.run(out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  err << app.help();
  return kExitConfig;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace cospadi
