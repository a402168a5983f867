#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cospadi/baselines.hpp"
#include "cospadi/codec.hpp"
#include "cospadi/factorizer.hpp"
#include "cospadi/report.hpp"
#include "cospadi/synthetic.hpp"
#include "cospadi/tensor_io.hpp"

namespace cospadi {

enum class Method { cospadi, svd, svd_data_aware };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

// What a reader of the container gets back: unpack(pack(cf)).
CompressedFactorization stored_form(const CompressedFactorization& cf, int truncate_bits,
                                    MaskMode mode);

// B and C rounded through bf16, the precision they are stored at.
LowRankFactorization stored_form(const LowRankFactorization& f);

// Low-rank artifacts live in tensor files as <name>.B, <name>.C (bf16) and
// <name>.meta = [gamma_target, data_aware ? 1 : 0] (f64).
void add_lowrank_tensors(TensorSet& set, const std::string& name, const LowRankFactorization& f,
                         double gamma_target);
struct LowRankArtifact {
  std::string name;
  LowRankFactorization factors;
  double gamma_target = 0.0;
};
std::vector<LowRankArtifact> read_lowrank_tensors(const TensorSet& set);

// "gamma=0.2:0.5:0.1" (inclusive range) or "gamma=0.2,0.3". Throws InvalidConfig.
std::vector<double> parse_sweep(std::string_view text, std::string_view key = "gamma");
std::vector<double> parse_list(std::string_view text);

struct BenchConfig {
  SynthSpec synth;  // seed is replaced per grid seed
  std::vector<double> gammas{0.2, 0.3, 0.4, 0.5};
  std::vector<double> rhos{2.0};
  std::vector<Method> methods{Method::cospadi, Method::svd_data_aware};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  MaskMode mask_mode = MaskMode::no_mask;
  int truncate_bits = 0;
  CompressOptions compress;
};

// Grid order: seed, gamma, method, then rho for sparse methods. Cells run in
// parallel; rows come back in grid order. Errors are measured on the stored
// (bf16) form of each factorization.
RunReport run_bench(const BenchConfig& config);

}  // namespace cospadi
