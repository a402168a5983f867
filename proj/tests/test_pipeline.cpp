#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <cstring>
#include <limits>

#include "cospadi/error.hpp"
#include "cospadi/group.hpp"
#include "cospadi/kernels.hpp"
#include "cospadi/linalg.hpp"
#include "cospadi/pipeline.hpp"
#include "test_util.hpp"

using namespace cospadi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cospadi_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string strip_last_column(const std::string& csv) {
  std::string out, line;
  std::istringstream in(csv);
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

double squared(double v) { return v * v; }

}  // namespace

TEST_CASE("union of subspaces without noise") {
  SynthSpec spec;
  spec.kind = SynthKind::union_of_subspaces;
  spec.seed = 3;
  const auto data = generate_synthetic(spec);
  REQUIRE(data.bases.size() == 4);
  for (std::size_t j = 0; j < spec.d2; ++j) {
    const auto& b = data.bases[data.labels[j]];
    const auto col = data.w.block(0, j, spec.d1, 1);
    const auto resid = col - matmul(b, matmul_tn(b, col));
    CHECK(resid.frobenius_norm() < 1e-10 * col.frobenius_norm());
    // and not in any other subspace
    for (std::size_t c = 0; c < 4; ++c) {
      if (c == data.labels[j]) continue;
      const auto& o = data.bases[c];
      CHECK((col - matmul(o, matmul_tn(o, col))).frobenius_norm() > 1e-3 * col.frobenius_norm());
    }
  }
  spec.subspaces = 9;
  CHECK_THROWS_AS(generate_synthetic(spec), InvalidConfig);
}

TEST_CASE("shared subspace rank") {
  SynthSpec spec;
  spec.kind = SynthKind::shared_subspace;
  spec.rank = 5;
  spec.d1 = 12;
  spec.d2 = 20;
  const auto data = generate_synthetic(spec);
  const auto sv = linalg::thin_svd(data.w).singular_values;
  int nonzero = 0;
  for (double s : sv) nonzero += s > 1e-10 * sv[0];
  CHECK(nonzero == 5);
  spec.rank = 13;
  CHECK_THROWS_AS(generate_synthetic(spec), InvalidConfig);
}

TEST_CASE("calibration condition number") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SynthSpec spec;
    spec.cond = 100.0;
    spec.seed = seed;
    const auto data = generate_synthetic(spec);
    const auto sv = linalg::thin_svd(data.x).singular_values;
    const double ratio = sv.front() / sv.back();
    CHECK(ratio >= 90.0);
    CHECK(ratio <= 110.0);
  }
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(calibration_with_condition(4, 8, 10.0, rng), InvalidConfig);
  CHECK_THROWS_AS(calibration_with_condition(16, 8, 0.5, rng), InvalidConfig);
}

TEST_CASE("synthetic data is reproducible") {
  SynthSpec spec;
  spec.kind = SynthKind::heavy_tailed;
  spec.noise = 0.1;
  spec.seed = 9;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.w == b.w);
  CHECK(a.x == b.x);
  spec.seed = 10;
  CHECK(!(generate_synthetic(spec).w == a.w));
  CHECK(parse_synth_kind("union") == SynthKind::union_of_subspaces);
  CHECK_THROWS_AS(parse_synth_kind("spiral"), InvalidConfig);
}

TEST_CASE("tensor files") {
  TempDir dir("tensors");
  TensorSet set;
  set.add("w", DenseMatrix::identity(2));
  write_tensors(dir.path / "one.cten", set);
  const auto back = ingest_tensors(dir.path / "one.cten");
  REQUIRE(back.size() == 1);
  CHECK(back.at("w") == DenseMatrix::identity(2));
  CHECK_THROWS_AS(back.at("missing"), IngestError);

  std::mt19937_64 rng(2);
  TensorSet many;
  const auto a = testutil::gaussian(5, 7, rng);
  const auto b = testutil::gaussian(3, 2, rng);
  const auto c = testutil::gaussian(4, 4, rng);
  many.add("layer0", a, TensorDtype::f64);
  many.add("layer0.calib", b, TensorDtype::f32);
  many.add("half", c, TensorDtype::bf16);
  const auto round = decode_tensors(encode_tensors(many));
  CHECK(round.names() == std::vector<std::string>{"layer0", "layer0.calib", "half"});
  CHECK(round.at("layer0") == a);
  for (std::size_t i = 0; i < b.size(); ++i)
    CHECK(round.at("layer0.calib").data()[i] == static_cast<double>(static_cast<float>(b.data()[i])));
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(round.at("half").data()[i] == to_double(to_bf16(c.data()[i])));
  CHECK(round.find("half")->dtype == TensorDtype::bf16);

  CHECK_THROWS_AS(many.add("layer0", a), InvalidConfig);
  CHECK_THROWS_AS(many.add("has space", a), InvalidConfig);
}

TEST_CASE("tensor file errors name the tensor") {
  TensorSet set;
  set.add("first", DenseMatrix::identity(2));
  set.add("second", DenseMatrix::identity(3));
  const auto bytes = encode_tensors(set);

  auto cut = bytes;
  cut.resize(bytes.size() - 5);
  try {
    decode_tensors(cut);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(e.tensor() == "second");
    CHECK(std::string(e.what()).find("second") != std::string::npos);
  }

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_tensors(bad), IngestError);

  TensorSet nan;
  nan.add("w", DenseMatrix(1, 1));
  auto nb = encode_tensors(nan);
  const double q = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(nb.data() + nb.size() - 8, &q, 8);
  try {
    decode_tensors(nb);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(e.tensor() == "w");
  }
  CHECK_THROWS_AS(ingest_tensors("/nonexistent/file.cten"), DataError);
}

TEST_CASE("low-rank artifacts round trip") {
  std::mt19937_64 rng(3);
  const auto w = testutil::gaussian(6, 9, rng);
  const auto f = svd_truncate(w, 2);
  TensorSet set;
  add_lowrank_tensors(set, "blk.q", f, 0.4);
  const auto arts = read_lowrank_tensors(decode_tensors(encode_tensors(set)));
  REQUIRE(arts.size() == 1);
  CHECK(arts[0].name == "blk.q");
  CHECK(arts[0].gamma_target == 0.4);
  CHECK(arts[0].factors.mode == LowRankMode::plain);
  CHECK(arts[0].factors.b == stored_form(f).b);
  CHECK(arts[0].factors.c == stored_form(f).c);
}

TEST_CASE("group validation") {
  LayerGroup g;
  g.id = "g";
  CHECK_THROWS_AS(g.validate(), GroupShapeError);
  std::mt19937_64 rng(4);
  g.names = {"a", "b"};
  g.weights = {testutil::gaussian(4, 6, rng), testutil::gaussian(4, 5, rng)};
  g.calibration = {testutil::gaussian(10, 4, rng), testutil::gaussian(10, 4, rng)};
  CHECK_THROWS_AS(g.validate(), GroupShapeError);
  g.weights[1] = testutil::gaussian(4, 6, rng);
  g.calibration[1] = testutil::gaussian(9, 4, rng);
  CHECK_THROWS_AS(g.validate(), GroupShapeError);
  g.calibration[1] = testutil::gaussian(10, 4, rng);
  CHECK_NOTHROW(g.validate());
  const auto wrong_plan = plan_sparse(4, 6, 0.3, 2.0, MaskMode::no_mask);
  CHECK_THROWS_AS(compress_group(g, wrong_plan), ShapeError);
}

TEST_CASE("singleton group equals a single-layer run") {
  std::mt19937_64 rng(5);
  LayerGroup g;
  g.id = "solo";
  g.names = {"solo"};
  g.weights = {testutil::gaussian(8, 20, rng)};
  g.calibration = {testutil::gaussian(40, 8, rng)};
  const auto plan = plan_group(8, 20, 1, 0.3, 2.0, MaskMode::no_mask);
  CompressOptions opts;
  opts.ksvd.seed = 11;
  opts.ksvd.iters = 15;
  const auto res = compress_group(g, plan, opts);
  const auto single = compress_layer(g.weights[0], g.calibration[0], plan, opts);
  CHECK(res.combined.dictionary == single.dictionary);
  CHECK(res.combined.codes == single.codes);
  CHECK(res.combined.report.objective_per_iter == single.report.objective_per_iter);
  REQUIRE(res.slices.size() == 1);
  CHECK(res.slices[0] == single.codes);
}

TEST_CASE("duplicate layers share identical slices") {
  std::mt19937_64 rng(6);
  const auto w = testutil::gaussian(8, 16, rng);
  const auto x = testutil::gaussian(40, 8, rng);
  LayerGroup g;
  g.id = "dup";
  g.names = {"a", "b"};
  g.weights = {w, w};
  g.calibration = {x, x};
  const auto plan = plan_group(8, 16, 2, 0.3, 2.0, MaskMode::no_mask);
  CompressOptions opts;
  opts.ksvd.init = InitMethod::svd_based;
  opts.ksvd.iters = 20;
  const auto res = compress_group(g, plan, opts);
  REQUIRE(res.slices.size() == 2);
  CHECK(res.slices[0] == res.slices[1]);
  REQUIRE(res.rows.size() == 2);
  CHECK(res.rows[0].activation_error_fro == res.rows[1].activation_error_fro);
  CHECK(res.rows[0].name == "a");
  CHECK(res.layer(1).codes == res.slices[1]);

  // Same sizes on one copy: the stacked problem is the singleton one scaled by √2.
  SizingPlan single = plan;
  single.d2 = 16;
  single.group_size = 1;
  const auto solo = compress_layer(w, x, single, opts);
  const double solo_err = activation_error(x, w, solo.reconstruct());
  CHECK(std::abs(res.rows[0].activation_error_fro - solo_err) <= 1e-9 * (1.0 + solo_err));
}

TEST_CASE("grouped objective splits over member columns") {
  std::mt19937_64 rng(7);
  LayerGroup g;
  g.id = "qkv";
  g.names = {"q", "k", "v"};
  for (int i = 0; i < 3; ++i) {
    g.weights.push_back(testutil::gaussian(8, 12, rng));
    g.calibration.push_back(calibration_with_condition(30, 8, 10.0, rng));
  }
  const auto plan = plan_group(8, 12, 3, 0.3, 2.0, MaskMode::no_mask);
  CompressOptions opts;
  opts.ksvd.iters = 15;
  const auto res = compress_group(g, plan, opts);
  const auto x_g = vstack(g.calibration);
  const auto w_g = hconcat(g.weights);
  const double total = squared((matmul(x_g, w_g) - matmul(x_g, res.combined.reconstruct())).frobenius_norm());
  double by_member = 0.0;
  for (std::size_t m = 0; m < 3; ++m) {
    const auto layer = res.layer(m);
    by_member += squared(activation_error(x_g, g.weights[m], layer.reconstruct()));
    // per-layer rows measure each member against its own calibration
    CHECK(res.rows[m].activation_error_fro ==
          doctest::Approx(activation_error(g.calibration[m], g.weights[m], layer.reconstruct())).epsilon(1e-10));
  }
  CHECK(std::abs(total - by_member) <= 1e-7 * total);
}

TEST_CASE("group sizing follows the concatenated width") {
  const auto p = plan_group(4096, 4096, 2, 0.2, 2.0, MaskMode::no_mask);
  CHECK(p.k == 3276);
  CHECK(p.s == 1638);
  CHECK(p.group_size == 2);
}

TEST_CASE("report csv format is stable") {
  CHECK(csv_header() ==
        "name,method,gamma_target,gamma_achieved,k,s_or_r,activation_error_fro,"
        "relative_activation_error,weight_error_fro,k_active,multiply_count,iterations,wall_seconds");
  RunRow row{"layer0", "cospadi", 0.2, 0.2001, 3276, 1638, 1.5, 0.25, 2.0, 12, 44, 60, 0.125};
  CHECK(csv_line(row) == "layer0,cospadi,0.2,0.2001,3276,1638,1.5,0.25,2,12,44,60,0.125");
  row.name = "a,b";
  CHECK(csv_line(row).rfind("\"a,b\",cospadi,", 0) == 0);
  RunReport rep{{row}};
  CHECK(rep.to_csv() == csv_header() + "\n" + csv_line(row) + "\n");
  CHECK(rep.to_json().find("\"multiply_count\": 44") != std::string::npos);
}

TEST_CASE("report rows come from the kernels") {
  std::mt19937_64 rng(8);
  const auto w = testutil::gaussian(6, 10, rng);
  const auto x = testutil::gaussian(20, 6, rng);
  const auto plan = plan_sparse(6, 10, 0.3, 2.0, MaskMode::no_mask);
  const auto cf = compress_layer(w, x, plan);
  const auto row = evaluate_sparse("l", "cospadi", w, x, cf.dictionary, cf.codes, plan, 3, 0.0);
  const auto k = apply_compressed(x, cf.dictionary, cf.codes);
  CHECK(row.multiply_count == k.count.total);
  CHECK(row.k_active == k.count.k_active);
  CHECK(row.activation_error_fro == doctest::Approx((matmul(x, w) - k.y).frobenius_norm()).epsilon(1e-12));
  CHECK(row.relative_activation_error == doctest::Approx(row.activation_error_fro / matmul(x, w).frobenius_norm()));
  CHECK(row.weight_error_fro == doctest::Approx((w - cf.reconstruct()).frobenius_norm()).epsilon(1e-12));
}

TEST_CASE("sweep parsing") {
  CHECK(parse_sweep("gamma=0.2:0.5:0.1") == std::vector<double>{0.2, 0.3, 0.4, 0.5});
  CHECK(parse_sweep("gamma=0.25,0.35") == std::vector<double>{0.25, 0.35});
  CHECK_THROWS_AS(parse_sweep("0.3"), InvalidConfig);
  CHECK_THROWS_AS(parse_sweep("rho=1:2:0.5"), InvalidConfig);
  CHECK_THROWS_AS(parse_sweep("gamma=0.5:0.2:0.1"), InvalidConfig);
  CHECK_THROWS_AS(parse_sweep("gamma=0.2:0.5:0"), InvalidConfig);
  CHECK(parse_list("1.5,2,4") == std::vector<double>{1.5, 2.0, 4.0});
  CHECK_THROWS_AS(parse_list("1,,2"), InvalidConfig);
  CHECK(parse_method("svd_data_aware") == Method::svd_data_aware);
  CHECK(to_string(Method::svd_data_aware) == "svd-data-aware");
}

TEST_CASE("bench grid is deterministic and ordered") {
  BenchConfig cfg;
  cfg.synth.d2 = 32;
  cfg.synth.noise = 0.01;
  cfg.synth.cond = 10.0;
  cfg.gammas = {0.3, 0.5};
  cfg.rhos = {2.0, 4.0};
  cfg.seeds = {0, 1};
  cfg.methods = {Method::cospadi, Method::svd, Method::svd_data_aware};
  cfg.compress.ksvd.iters = 10;
  const auto a = run_bench(cfg);
  const auto b = run_bench(cfg);
  REQUIRE(a.rows.size() == 2 * 2 * (2 + 1 + 1));
  CHECK(strip_last_column(a.to_csv()) == strip_last_column(b.to_csv()));
  CHECK(a.rows[0].name == "seed0/rho2");
  CHECK(a.rows[1].name == "seed0/rho4");
  CHECK(a.rows[2].method == "svd");
  CHECK(a.rows[3].method == "svd-data-aware");
  CHECK(a.rows[4].gamma_target == 0.5);
  CHECK(a.rows[8].name == "seed1/rho2");
  for (const auto& r : a.rows) {
    CHECK(std::isfinite(r.relative_activation_error));
    CHECK(r.relative_activation_error >= 0.0);
    CHECK(r.gamma_achieved >= r.gamma_target - 1e-12);
  }
  BenchConfig empty = cfg;
  empty.seeds.clear();
  CHECK_THROWS_AS(run_bench(empty), InvalidConfig);
}
