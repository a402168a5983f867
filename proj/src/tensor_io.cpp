#include "cospadi/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "cospadi/codec.hpp"
#include "cospadi/error.hpp"

namespace cospadi {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

template <typename T>
T get_le(const std::uint8_t* p) {
  T v = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<T>(p[b]) << (8 * b);
  return v;
}

bool valid_name(std::string_view name) {
  return !name.empty() && std::none_of(name.begin(), name.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  });
}

}  // namespace

std::string_view to_string(TensorDtype t) {
  switch (t) {
    case TensorDtype::f32: return "f32";
    case TensorDtype::f64: return "f64";
    case TensorDtype::bf16: return "bf16";
  }
  return "f64";
}

TensorDtype parse_dtype(std::string_view s) {
  if (s == "f32") return TensorDtype::f32;
  if (s == "f64") return TensorDtype::f64;
  if (s == "bf16") return TensorDtype::bf16;
  throw IngestError("", "unknown dtype '" + std::string(s) + "'");
}

std::size_t dtype_bytes(TensorDtype t) {
  switch (t) {
    case TensorDtype::f32: return 4;
    case TensorDtype::f64: return 8;
    case TensorDtype::bf16: return 2;
  }
  return 8;
}

TensorSet::TensorSet(std::vector<NamedTensor> tensors) {
  for (auto& t : tensors) add(std::move(t.name), std::move(t.value), t.dtype);
}

void TensorSet::add(std::string name, DenseMatrix value, TensorDtype dtype) {
  if (!valid_name(name)) throw InvalidConfig("tensor name '" + name + "' is empty or has whitespace");
  if (contains(name)) throw InvalidConfig("duplicate tensor name '" + name + "'");
  tensors_.push_back({std::move(name), std::move(value), dtype});
}

const NamedTensor* TensorSet::find(std::string_view name) const {
  for (const auto& t : tensors_)
    if (t.name == name) return &t;
  return nullptr;
}

bool TensorSet::contains(std::string_view name) const { return find(name) != nullptr; }

const DenseMatrix& TensorSet::at(std::string_view name) const {
  if (const auto* t = find(name)) return t->value;
  throw IngestError(std::string(name), "not present in tensor file");
}

std::vector<std::string> TensorSet::names() const {
  std::vector<std::string> out;
  for (const auto& t : tensors_) out.push_back(t.name);
  return out;
}

std::vector<std::uint8_t> encode_tensors(const TensorSet& set) {
  std::ostringstream index;
  std::uint64_t offset = 0;
  for (const auto& t : set.tensors()) {
    index << t.name << ' ' << to_string(t.dtype) << ' ' << t.value.rows() << ' ' << t.value.cols()
          << ' ' << offset << '\n';
    offset += static_cast<std::uint64_t>(t.value.size()) * dtype_bytes(t.dtype);
  }
  const std::string text = index.str();

  std::vector<std::uint8_t> out(std::begin(kTensorMagic), std::end(kTensorMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& t : set.tensors()) {
    for (double v : t.value.data()) {
      switch (t.dtype) {
        case TensorDtype::f64: put_le(out, std::bit_cast<std::uint64_t>(v)); break;
        case TensorDtype::f32: {
          const float f = static_cast<float>(v);
          if (!std::isfinite(f)) throw NonFiniteValue("tensor '" + t.name + "' overflows f32");
          put_le(out, std::bit_cast<std::uint32_t>(f));
          break;
        }
        case TensorDtype::bf16: put_le(out, to_bf16(v).bits); break;
      }
    }
  }
  return out;
}

TensorSet decode_tensors(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !std::equal(std::begin(kTensorMagic), std::end(kTensorMagic), bytes.begin()))
    throw IngestError("", "bad magic: not a CTEN0001 tensor file");
  const std::uint32_t index_len = get_le<std::uint32_t>(bytes.data() + 8);
  if (bytes.size() - 12 < index_len) throw IngestError("", "index length exceeds file size");
  const std::string text(reinterpret_cast<const char*>(bytes.data() + 12), index_len);
  const std::span<const std::uint8_t> payload = bytes.subspan(12 + index_len);

  TensorSet set;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string name, dtype_text, extra;
    std::uint64_t rows = 0, cols = 0, offset = 0;
    if (!(fields >> name >> dtype_text >> rows >> cols >> offset) || (fields >> extra))
      throw IngestError(name, "malformed index line '" + line + "'");
    TensorDtype dtype;
    try {
      dtype = parse_dtype(dtype_text);
    } catch (const IngestError&) {
      throw IngestError(name, "unknown dtype '" + dtype_text + "'");
    }
    if (set.contains(name)) throw IngestError(name, "duplicate tensor name");
    const std::size_t width = dtype_bytes(dtype);
    if (cols != 0 && rows > payload.size() / cols / width + 1)
      throw IngestError(name, "payload truncated");
    const std::uint64_t count = rows * cols;
    if (offset > payload.size() || count * width > payload.size() - offset)
      throw IngestError(name, "payload truncated: needs " + std::to_string(count * width) +
                                  " bytes at offset " + std::to_string(offset) + ", payload has " +
                                  std::to_string(payload.size()));
    std::vector<double> values(count);
    const std::uint8_t* p = payload.data() + offset;
    for (std::uint64_t i = 0; i < count; ++i, p += width) {
      switch (dtype) {
        case TensorDtype::f64: values[i] = std::bit_cast<double>(get_le<std::uint64_t>(p)); break;
        case TensorDtype::f32: values[i] = std::bit_cast<float>(get_le<std::uint32_t>(p)); break;
        case TensorDtype::bf16: values[i] = to_double(Bf16{get_le<std::uint16_t>(p)}); break;
      }
      if (!std::isfinite(values[i]))
        throw IngestError(name, "non-finite entry at flat index " + std::to_string(i));
    }
    set.add(name, DenseMatrix(rows, cols, std::move(values)), dtype);
  }
  return set;
}

void write_tensors(const std::filesystem::path& path, const TensorSet& set) {
  write_file_bytes(path, encode_tensors(set));
}

TensorSet ingest_tensors(const std::filesystem::path& path) {
  return decode_tensors(read_file_bytes(path));
}

}  // namespace cospadi
