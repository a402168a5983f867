#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cospadi/factorizer.hpp"
#include "cospadi/planner.hpp"

namespace cospadi {

// Brain-float-16: 1 sign bit, 8 exponent bits, 7 explicit mantissa bits.
struct Bf16 {
  std::uint16_t bits = 0;
  friend bool operator==(Bf16, Bf16) = default;
};

struct Bf16Report {
  std::size_t saturated = 0;  // values clamped to the largest finite bf16
};

inline constexpr std::uint16_t kBf16MaxFinite = 0x7F7F;

// Narrows to float, then rounds the low 16 bits to nearest-even. Overflow
// saturates to ±max finite and is counted in report. Throws NonFiniteValue.
Bf16 to_bf16(double x, Bf16Report* report = nullptr);
double to_double(Bf16 w);

// Clears the lowest m explicit mantissa bits (m in [0, 7]); m = 2 gives the
// 14-bit coefficient format.
Bf16 truncate_mantissa(Bf16 w, int m);

// Layer membership of a shared-dictionary container. Empty for a single layer.
struct GroupInfo {
  std::vector<std::string> members;
  std::vector<std::size_t> layer_cols;
  friend bool operator==(const GroupInfo&, const GroupInfo&) = default;
};

// Bit-exact storage form of a CompressedFactorization.
//   dict_payload:  d1*k words, row-major D_a
//   mask:          ceil(k*d2/16) words; entry (atom i, column j) is flat bit
//                  j*k + i, stored in word flat/16 at bit flat%16 (bit 0 = LSB)
//   value_payload: one word per nonzero, columns in order, atoms ascending
struct PackedFactorization {
  std::size_t d1 = 0;
  std::size_t d2 = 0;
  std::size_t k = 0;
  std::size_t s = 0;
  MaskMode mask_mode = MaskMode::with_mask;
  int mantissa_truncated_bits = 0;
  double gamma_target = 0.0;
  double rho = 0.0;
  std::size_t plan_r = 0;
  GroupInfo group;
  std::vector<std::uint16_t> dict_payload;
  std::vector<std::uint16_t> mask;
  std::vector<std::uint16_t> value_payload;

  // Words charged by the compression-ratio accounting of mask_mode: the
  // mask is always stored, but only with_mask charges for it.
  std::uint64_t accounted_words() const;
  // Every payload word actually written.
  std::uint64_t payload_words() const;

  friend bool operator==(const PackedFactorization&, const PackedFactorization&) = default;
};

// Throws CorruptCodes when the codes break the sparsity contract. Entries
// whose 16-bit value is zero are dropped together with their mask bit.
PackedFactorization pack(const CompressedFactorization& cf, int mantissa_bits_to_truncate,
                         MaskMode mode, Bf16Report* report = nullptr);

// Throws CorruptPayload (with the payload byte offset) on length or mask
// inconsistencies.
CompressedFactorization unpack(const PackedFactorization& p);

inline constexpr char kCospadiMagic[8] = {'C', 'O', 'S', 'P', 'A', 'D', 'I', '1'};
inline constexpr int kCospadiVersion = 1;

// Container: magic "COSPADI1", u32 LE header length, key=value header text,
// then dict / mask / value payloads as little-endian 16-bit words.
std::vector<std::uint8_t> serialize(const PackedFactorization& p);
PackedFactorization deserialize(std::span<const std::uint8_t> bytes);

void write_cospadi(const std::filesystem::path& path, const PackedFactorization& p);
PackedFactorization read_cospadi(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cospadi
