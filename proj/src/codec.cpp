#include "cospadi/codec.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "cospadi/error.hpp"

namespace cospadi {

Bf16 to_bf16(double x, Bf16Report* report) {
  if (!std::isfinite(x)) throw NonFiniteValue("to_bf16: non-finite value");
  const float f = static_cast<float>(x);
  const std::uint32_t sign16 = (std::bit_cast<std::uint32_t>(f) >> 16) & 0x8000u;
  auto saturate = [&] {
    if (report) ++report->saturated;
    return Bf16{static_cast<std::uint16_t>(sign16 | kBf16MaxFinite)};
  };
  if (std::isinf(f)) return saturate();
  std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  const std::uint32_t rounding_bias = 0x7FFFu + ((bits >> 16) & 1u);
  bits += rounding_bias;
  const auto out = static_cast<std::uint16_t>(bits >> 16);
  if ((out & 0x7F80u) == 0x7F80u) return saturate();
  return Bf16{out};
}

double to_double(Bf16 w) {
  return static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(w.bits) << 16));
}

Bf16 truncate_mantissa(Bf16 w, int m) {
  if (m < 0 || m > 7) throw InvalidConfig("truncate_mantissa: m must lie in [0, 7]");
  const auto keep = static_cast<std::uint16_t>(~((1u << m) - 1u));
  return Bf16{static_cast<std::uint16_t>(w.bits & keep)};
}

std::uint64_t PackedFactorization::accounted_words() const {
  std::uint64_t words = dict_payload.size() + value_payload.size();
  if (mask_mode == MaskMode::with_mask) words += mask.size();
  return words;
}

std::uint64_t PackedFactorization::payload_words() const {
  return dict_payload.size() + mask.size() + value_payload.size();
}

PackedFactorization pack(const CompressedFactorization& cf, int m, MaskMode mode,
                         Bf16Report* report) {
  if (m < 0 || m > 7) throw InvalidConfig("pack: truncated bits must lie in [0, 7]");
  const auto& codes = cf.codes;
  const auto& d = cf.dictionary.atoms;
  if (d.cols() != codes.k()) throw CorruptCodes("pack: dictionary width does not match codes");
  codes.validate();

  PackedFactorization p;
  p.d1 = d.rows();
  p.d2 = codes.cols();
  p.k = codes.k();
  p.s = codes.s();
  p.mask_mode = mode;
  p.mantissa_truncated_bits = m;
  p.gamma_target = cf.plan.gamma_target;
  p.rho = cf.plan.rho;
  p.plan_r = cf.plan.r;

  p.dict_payload.reserve(d.size());
  for (double v : d.data()) p.dict_payload.push_back(to_bf16(v, report).bits);

  p.mask.assign(mask_words(p.k, p.d2), 0);
  p.value_payload.reserve(codes.nnz());
  for (std::size_t j = 0; j < p.d2; ++j) {
    const auto& col = codes.column(j);
    for (std::size_t q = 0; q < col.nnz(); ++q) {
      const Bf16 w = truncate_mantissa(to_bf16(col.values[q], report), m);
      if ((w.bits & 0x7FFFu) == 0) continue;  // underflowed to ±0
      const std::uint64_t flat = static_cast<std::uint64_t>(j) * p.k + col.support[q];
      p.mask[flat / 16] |= static_cast<std::uint16_t>(1u << (flat % 16));
      p.value_payload.push_back(w.bits);
    }
  }
  return p;
}

CompressedFactorization unpack(const PackedFactorization& p) {
  const std::uint64_t dict_words = static_cast<std::uint64_t>(p.d1) * p.k;
  if (p.dict_payload.size() != dict_words)
    throw CorruptPayload(0, "unpack: dictionary payload has " +
                                std::to_string(p.dict_payload.size()) + " words, expected " +
                                std::to_string(dict_words));
  const std::size_t mask_offset = 2 * p.dict_payload.size();
  if (p.mask.size() != mask_words(p.k, p.d2))
    throw CorruptPayload(mask_offset, "unpack: mask has wrong word count");
  const std::size_t value_offset = mask_offset + 2 * p.mask.size();

  const std::uint64_t total_bits = static_cast<std::uint64_t>(p.k) * p.d2;
  for (std::uint64_t bit = total_bits; bit < 16 * p.mask.size(); ++bit)
    if (p.mask[bit / 16] >> (bit % 16) & 1u)
      throw CorruptPayload(mask_offset + 2 * (bit / 16), "unpack: padding bit set in mask");

  std::vector<SparseColumn> cols(p.d2);
  std::size_t cursor = 0;
  for (std::size_t j = 0; j < p.d2; ++j) {
    auto& col = cols[j];
    for (std::size_t i = 0; i < p.k; ++i) {
      const std::uint64_t flat = static_cast<std::uint64_t>(j) * p.k + i;
      if (!(p.mask[flat / 16] >> (flat % 16) & 1u)) continue;
      if (cursor >= p.value_payload.size())
        throw CorruptPayload(value_offset + 2 * cursor,
                             "unpack: mask popcount exceeds value payload");
      const double v = to_double(Bf16{p.value_payload[cursor]});
      if (v == 0.0 || !std::isfinite(v))
        throw CorruptPayload(value_offset + 2 * cursor, "unpack: zero or non-finite code value");
      col.support.push_back(static_cast<std::uint32_t>(i));
      col.values.push_back(v);
      ++cursor;
    }
    if (col.nnz() > p.s)
      throw CorruptPayload(mask_offset + 2 * ((static_cast<std::uint64_t>(j) * p.k) / 16),
                           "unpack: column " + std::to_string(j) + " exceeds sparsity");
  }
  if (cursor != p.value_payload.size())
    throw CorruptPayload(value_offset + 2 * cursor, "unpack: value payload longer than mask popcount");

  std::vector<double> dict(p.dict_payload.size());
  for (std::size_t i = 0; i < dict.size(); ++i) dict[i] = to_double(Bf16{p.dict_payload[i]});

  CompressedFactorization cf;
  cf.dictionary = {DenseMatrix(p.d1, p.k, std::move(dict)), DictionarySpace::activation};
  cf.codes = SparseCodes(p.k, p.s, std::move(cols));
  auto& plan = cf.plan;
  plan.kind = PlanKind::sparse;
  plan.d1 = p.d1;
  plan.d2 = p.d2;
  plan.group_size = p.group.members.empty() ? 1 : p.group.members.size();
  plan.gamma_target = p.gamma_target;
  plan.rho = p.rho;
  plan.mask_mode = p.mask_mode;
  plan.k = p.k;
  plan.s = p.s;
  plan.r = p.plan_r;
  plan.stored_words = sparse_words(p.d1, p.d2, p.k, static_cast<std::uint64_t>(p.s) * p.d2,
                                   p.mask_mode);
  plan.gamma_achieved = 1.0 - static_cast<double>(plan.stored_words) /
                                  (static_cast<double>(p.d1) * static_cast<double>(p.d2));
  return cf;
}

// ---------------------------------------------------------------------------
// Container

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>) {
      out += items[i];
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_words(std::vector<std::uint8_t>& out, const std::vector<std::uint16_t>& words) {
  for (std::uint16_t w : words) {
    out.push_back(static_cast<std::uint8_t>(w & 0xFF));
    out.push_back(static_cast<std::uint8_t>(w >> 8));
  }
}

std::uint64_t parse_uint(const std::map<std::string, std::string>& kv, const std::string& key,
                         std::size_t offset) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw CorruptPayload(offset, "header is missing '" + key + "'");
  std::uint64_t v = 0;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw CorruptPayload(offset, "header field '" + key + "' is not an integer");
  return v;
}

double parse_real(const std::map<std::string, std::string>& kv, const std::string& key,
                  std::size_t offset) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw CorruptPayload(offset, "header is missing '" + key + "'");
  double v = 0.0;
  const auto& s = it->second;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw CorruptPayload(offset, "header field '" + key + "' is not a number");
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize(const PackedFactorization& p) {
  for (const auto& name : p.group.members)
    if (name.find_first_of(",\n=") != std::string::npos || name.empty())
      throw InvalidConfig("serialize: layer name '" + name + "' is empty or contains , = or newline");

  std::string header;
  header += "version=" + std::to_string(kCospadiVersion) + "\n";
  header += "d1=" + std::to_string(p.d1) + "\n";
  header += "d2=" + std::to_string(p.d2) + "\n";
  header += "k=" + std::to_string(p.k) + "\n";
  header += "s=" + std::to_string(p.s) + "\n";
  header += "nnz=" + std::to_string(p.value_payload.size()) + "\n";
  header += "mask_mode=" + std::string(to_string(p.mask_mode)) + "\n";
  header += "truncated_bits=" + std::to_string(p.mantissa_truncated_bits) + "\n";
  header += "gamma_target=" + format_double(p.gamma_target) + "\n";
  header += "rho=" + format_double(p.rho) + "\n";
  header += "plan_r=" + std::to_string(p.plan_r) + "\n";
  header += "group_size=" + std::to_string(p.group.members.empty() ? 1 : p.group.members.size()) + "\n";
  header += "members=" + join(p.group.members) + "\n";
  header += "layer_cols=" + join(p.group.layer_cols) + "\n";

  std::vector<std::uint8_t> out;
  out.reserve(12 + header.size() + 2 * p.payload_words());
  out.insert(out.end(), std::begin(kCospadiMagic), std::end(kCospadiMagic));
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  put_words(out, p.dict_payload);
  put_words(out, p.mask);
  put_words(out, p.value_payload);
  return out;
}

PackedFactorization deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCospadiMagic, 8) != 0)
    throw NotACospadiFile("deserialize: missing COSPADI1 magic");
  if (bytes.size() < 12) throw CorruptPayload(8, "deserialize: truncated header length");
  std::uint32_t header_len = 0;
  for (int b = 0; b < 4; ++b) header_len |= static_cast<std::uint32_t>(bytes[8 + b]) << (8 * b);
  if (bytes.size() < 12 + static_cast<std::size_t>(header_len))
    throw CorruptPayload(12, "deserialize: header runs past end of file");
  const std::string header(reinterpret_cast<const char*>(bytes.data() + 12), header_len);

  std::map<std::string, std::string> kv;
  for (const auto& line : split(header, '\n')) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CorruptPayload(12, "deserialize: malformed header line");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto version = parse_uint(kv, "version", 12);
  if (version != static_cast<std::uint64_t>(kCospadiVersion))
    throw UnsupportedVersion("deserialize: container version " + std::to_string(version) +
                             " is not supported (expected " + std::to_string(kCospadiVersion) + ")");

  PackedFactorization p;
  p.d1 = parse_uint(kv, "d1", 12);
  p.d2 = parse_uint(kv, "d2", 12);
  p.k = parse_uint(kv, "k", 12);
  p.s = parse_uint(kv, "s", 12);
  const auto nnz = parse_uint(kv, "nnz", 12);
  try {
    p.mask_mode = parse_mask_mode(kv.count("mask_mode") ? kv.at("mask_mode") : "");
  } catch (const InvalidConfig&) {
    throw CorruptPayload(12, "deserialize: bad mask_mode");
  }
  p.mantissa_truncated_bits = static_cast<int>(parse_uint(kv, "truncated_bits", 12));
  if (p.mantissa_truncated_bits > 7) throw CorruptPayload(12, "deserialize: truncated_bits > 7");
  p.gamma_target = parse_real(kv, "gamma_target", 12);
  p.rho = parse_real(kv, "rho", 12);
  p.plan_r = parse_uint(kv, "plan_r", 12);
  p.group.members = split(kv.count("members") ? kv.at("members") : "", ',');
  for (const auto& c : split(kv.count("layer_cols") ? kv.at("layer_cols") : "", ',')) {
    std::size_t v = 0;
    const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
    if (res.ec != std::errc()) throw CorruptPayload(12, "deserialize: bad layer_cols");
    p.group.layer_cols.push_back(v);
  }
  const auto group_size = parse_uint(kv, "group_size", 12);
  if (!p.group.members.empty() && group_size != p.group.members.size())
    throw CorruptPayload(12, "deserialize: group_size does not match member list");

  const std::size_t payload_start = 12 + header_len;
  const std::uint64_t dict_words = static_cast<std::uint64_t>(p.d1) * p.k;
  const std::uint64_t m_words = mask_words(p.k, p.d2);
  const std::uint64_t expected = 2 * (dict_words + m_words + nnz);
  const std::uint64_t available = bytes.size() - payload_start;
  if (available != expected) {
    throw CorruptPayload(payload_start + std::min(available, expected),
                         "deserialize: payload is " + std::to_string(available) +
                             " bytes, header implies " + std::to_string(expected));
  }

  auto read_words = [&](std::size_t offset, std::uint64_t count) {
    std::vector<std::uint16_t> words(count);
    for (std::uint64_t i = 0; i < count; ++i)
      words[i] = static_cast<std::uint16_t>(bytes[offset + 2 * i] |
                                            (static_cast<std::uint16_t>(bytes[offset + 2 * i + 1]) << 8));
    return words;
  };
  p.dict_payload = read_words(payload_start, dict_words);
  p.mask = read_words(payload_start + 2 * dict_words, m_words);
  p.value_payload = read_words(payload_start + 2 * (dict_words + m_words), nnz);
  return p;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

void write_cospadi(const std::filesystem::path& path, const PackedFactorization& p) {
  write_file_bytes(path, serialize(p));
}

PackedFactorization read_cospadi(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

}  // namespace cospadi
