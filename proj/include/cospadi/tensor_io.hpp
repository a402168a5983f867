#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cospadi/matrix.hpp"

namespace cospadi {

enum class TensorDtype { f32, f64, bf16 };

std::string_view to_string(TensorDtype t);
TensorDtype parse_dtype(std::string_view s);
std::size_t dtype_bytes(TensorDtype t);

struct NamedTensor {
  std::string name;
  DenseMatrix value;
  TensorDtype dtype = TensorDtype::f64;  // storage type on disk
};

// Tensors in file order with lookup by name.
class TensorSet {
 public:
  TensorSet() = default;
  explicit TensorSet(std::vector<NamedTensor> tensors);

  void add(std::string name, DenseMatrix value, TensorDtype dtype = TensorDtype::f64);
  bool contains(std::string_view name) const;
  // Throws IngestError if absent.
  const DenseMatrix& at(std::string_view name) const;
  const NamedTensor* find(std::string_view name) const;

  std::span<const NamedTensor> tensors() const noexcept { return tensors_; }
  std::size_t size() const noexcept { return tensors_.size(); }
  std::vector<std::string> names() const;

 private:
  std::vector<NamedTensor> tensors_;
};

inline constexpr char kTensorMagic[8] = {'C', 'T', 'E', 'N', '0', '0', '0', '1'};

// Layout: magic "CTEN0001", u32 LE index length, index text with one line
// "name dtype rows cols offset" per tensor (offset in bytes from the start
// of the payload area), then little-endian row-major payloads.
std::vector<std::uint8_t> encode_tensors(const TensorSet& set);
TensorSet decode_tensors(std::span<const std::uint8_t> bytes);

void write_tensors(const std::filesystem::path& path, const TensorSet& set);
TensorSet ingest_tensors(const std::filesystem::path& path);

}  // namespace cospadi
