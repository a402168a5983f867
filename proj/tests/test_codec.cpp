#include "doctest.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include "cospadi/codec.hpp"
#include "cospadi/error.hpp"
#include "test_util.hpp"

using namespace cospadi;

namespace {

// Random factorization with exactly s nonzeros per column.
CompressedFactorization random_factorization(std::size_t d1, std::size_t d2, std::size_t k,
                                             std::size_t s, std::mt19937_64& rng) {
  CompressedFactorization cf;
  cf.dictionary = {testutil::gaussian(d1, k, rng), DictionarySpace::activation};
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<SparseColumn> cols(d2);
  std::vector<std::uint32_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = static_cast<std::uint32_t>(i);
  for (auto& col : cols) {
    std::shuffle(idx.begin(), idx.end(), rng);
    col.support.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(s));
    std::sort(col.support.begin(), col.support.end());
    for (std::size_t q = 0; q < s; ++q) {
      double v = n(rng);
      while (std::abs(v) < 1e-3) v = n(rng);
      col.values.push_back(v);
    }
  }
  cf.codes = SparseCodes(k, s, std::move(cols));
  auto& p = cf.plan;
  p.kind = PlanKind::sparse;
  p.d1 = d1;
  p.d2 = d2;
  p.k = k;
  p.s = s;
  p.gamma_target = 0.3;
  p.rho = static_cast<double>(k) / static_cast<double>(s);
  return cf;
}

// Independent bf16 oracle: exact round-half-even on the float bit pattern.
std::uint16_t bf16_oracle(float f) {
  const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  std::uint32_t hi = u >> 16;
  const std::uint32_t lo = u & 0xFFFFu;
  if (lo > 0x8000u || (lo == 0x8000u && (hi & 1u))) ++hi;
  return static_cast<std::uint16_t>(hi);
}

int popcount_column(const PackedFactorization& p, std::size_t j) {
  int c = 0;
  for (std::size_t i = 0; i < p.k; ++i) {
    const std::uint64_t flat = j * p.k + i;
    c += (p.mask[flat / 16] >> (flat % 16)) & 1u;
  }
  return c;
}

}  // namespace

TEST_CASE("bf16 conversion examples") {
  CHECK(to_bf16(1.0).bits == 0x3F80);
  CHECK(to_bf16(0.0).bits == 0x0000);
  CHECK(to_bf16(-2.0).bits == 0xC000);
  CHECK(to_double(to_bf16(1.0 + std::ldexp(1.0, -8))) == 1.0);  // tie, even mantissa stays
  CHECK(to_double(to_bf16(1.0 + 3 * std::ldexp(1.0, -8))) == 1.0 + std::ldexp(1.0, -6));  // tie rounds up to even
  CHECK(to_double(to_bf16(1.0 + std::ldexp(1.0, -7))) == 1.0 + std::ldexp(1.0, -7));

  Bf16Report rep;
  CHECK(to_bf16(1e39, &rep).bits == kBf16MaxFinite);
  CHECK(to_bf16(-1e300, &rep).bits == (0x8000 | kBf16MaxFinite));
  CHECK(to_bf16(3.4e38, &rep).bits == kBf16MaxFinite);  // rounds past max finite
  CHECK(rep.saturated == 3);
  CHECK_THROWS_AS(to_bf16(std::numeric_limits<double>::quiet_NaN()), NonFiniteValue);
  CHECK_THROWS_AS(to_bf16(std::numeric_limits<double>::infinity()), NonFiniteValue);
}

TEST_CASE("bf16 agrees with a bitwise oracle") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::uint32_t> bits;
  int checked = 0;
  while (checked < 20000) {
    const float f = std::bit_cast<float>(bits(rng));
    if (!std::isfinite(f)) continue;
    const std::uint16_t expected = bf16_oracle(f);
    if ((expected & 0x7F80u) == 0x7F80u) continue;  // saturating range checked above
    CHECK(to_bf16(static_cast<double>(f)).bits == expected);
    ++checked;
  }
  // Relative rounding error of normal values is at most 2^-8.
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const double v = n(rng);
    CHECK(std::abs(to_double(to_bf16(v)) - v) <= std::ldexp(std::abs(v), -8) * (1 + 1e-6));
  }
}

TEST_CASE("mantissa truncation examples") {
  const Bf16 w = to_bf16(1.9921875);
  CHECK(w.bits == 0x3FFF);
  CHECK(truncate_mantissa(w, 0) == w);
  CHECK(to_double(truncate_mantissa(w, 7)) == 1.0);
  CHECK(to_double(truncate_mantissa(to_bf16(1.75), 2)) == 1.75);
  CHECK(to_double(truncate_mantissa(to_bf16(-1.9921875), 7)) == -1.0);
  CHECK_THROWS_AS(truncate_mantissa(w, 8), InvalidConfig);
  CHECK_THROWS_AS(truncate_mantissa(w, -1), InvalidConfig);
}

TEST_CASE("mantissa truncation properties") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int t = 0; t < 3000; ++t) {
    const Bf16 w = to_bf16(n(rng));
    const double v = to_double(w);
    double prev = 0.0;
    for (int m = 0; m <= 7; ++m) {
      const Bf16 tm = truncate_mantissa(w, m);
      CHECK(truncate_mantissa(tm, m) == tm);
      CHECK((tm.bits & 0xFF80u) == (w.bits & 0xFF80u));  // sign and exponent untouched
      CHECK((tm.bits & ((1u << m) - 1u)) == 0u);
      const double tv = to_double(tm);
      CHECK(std::abs(tv) <= std::abs(v));
      if (v != 0.0) {
        const double rel = std::abs(tv - v) / std::abs(v);
        CHECK(rel <= std::ldexp(1.0, m - 7));
        CHECK(rel >= prev);
        prev = rel;
      }
    }
  }
}

TEST_CASE("mask bit layout") {
  std::vector<SparseColumn> cols(3);
  cols[0] = {{0}, {1.5}};
  CompressedFactorization cf;
  cf.dictionary = {DenseMatrix(2, 16), DictionarySpace::activation};
  cf.codes = SparseCodes(16, 2, cols);
  auto p = pack(cf, 0, MaskMode::with_mask);
  REQUIRE(p.mask.size() == 3);
  CHECK(p.mask[0] == 0x0001);
  CHECK(p.mask[1] == 0);
  CHECK(p.mask[2] == 0);
  CHECK(p.value_payload == std::vector<std::uint16_t>{to_bf16(1.5).bits});

  // Entry (atom 3, column 2) with k = 5: flat 13, word 0, bit 13.
  std::vector<SparseColumn> c2(3);
  c2[2] = {{3}, {-1.0}};
  cf.dictionary = {DenseMatrix(2, 5), DictionarySpace::activation};
  cf.codes = SparseCodes(5, 1, c2);
  p = pack(cf, 0, MaskMode::no_mask);
  CHECK(p.mask == std::vector<std::uint16_t>{1u << 13});

  // Entry (atom 1, column 3) with k = 5: flat 16, word 1, bit 0.
  std::vector<SparseColumn> c3(4);
  c3[3] = {{1}, {2.0}};
  cf.codes = SparseCodes(5, 1, c3);
  p = pack(cf, 0, MaskMode::no_mask);
  CHECK(p.mask == std::vector<std::uint16_t>{0, 1});
}

TEST_CASE("empty codes") {
  CompressedFactorization cf;
  std::mt19937_64 rng(13);
  cf.dictionary = {testutil::gaussian(3, 4, rng), DictionarySpace::activation};
  cf.codes = SparseCodes::zeros(4, 2, 9);
  const auto p = pack(cf, 0, MaskMode::with_mask);
  CHECK(p.mask.size() == 3);
  for (auto w : p.mask) CHECK(w == 0);
  CHECK(p.value_payload.empty());
  const auto back = unpack(p);
  CHECK(back.codes.nnz() == 0);
  CHECK(back.codes.cols() == 9);
}

TEST_CASE("pack and unpack round trip") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 20; ++t) {
    const auto cf = random_factorization(6, 11, 7, 3, rng);
    const auto p0 = pack(cf, 0, MaskMode::with_mask);
    const auto u0 = unpack(p0);
    CHECK(pack(u0, 0, MaskMode::with_mask) == p0);
    for (std::size_t i = 0; i < cf.dictionary.atoms.size(); ++i)
      CHECK(u0.dictionary.atoms.data()[i] == to_double(to_bf16(cf.dictionary.atoms.data()[i])));
    for (std::size_t j = 0; j < cf.codes.cols(); ++j) {
      CHECK(u0.codes.column(j).support == cf.codes.column(j).support);
      for (std::size_t q = 0; q < cf.codes.column(j).nnz(); ++q)
        CHECK(u0.codes.column(j).values[q] == to_double(to_bf16(cf.codes.column(j).values[q])));
    }

    const auto u2 = unpack(pack(cf, 2, MaskMode::with_mask));
    CHECK(u2.dictionary == u0.dictionary);  // dictionary is never truncated
    for (std::size_t j = 0; j < cf.codes.cols(); ++j)
      for (std::size_t q = 0; q < cf.codes.column(j).nnz(); ++q)
        CHECK(u2.codes.column(j).values[q] ==
              to_double(truncate_mantissa(to_bf16(cf.codes.column(j).values[q]), 2)));
  }
}

TEST_CASE("values that round to zero are dropped with their mask bit") {
  CompressedFactorization cf;
  cf.dictionary = {DenseMatrix(1, 3), DictionarySpace::activation};
  cf.codes = SparseCodes(3, 2, {SparseColumn{{0, 2}, {1e-60, 4.0}}});
  const auto p = pack(cf, 0, MaskMode::with_mask);
  CHECK(p.mask == std::vector<std::uint16_t>{0b100});
  CHECK(p.value_payload.size() == 1);
}

TEST_CASE("unpack rejects inconsistent payloads") {
  std::mt19937_64 rng(15);
  const auto cf = random_factorization(4, 6, 5, 2, rng);
  const auto good = pack(cf, 0, MaskMode::with_mask);

  auto p = good;
  p.value_payload.pop_back();
  CHECK_THROWS_AS(unpack(p), CorruptPayload);
  p = good;
  p.value_payload.push_back(0x3F80);
  CHECK_THROWS_AS(unpack(p), CorruptPayload);
  p = good;
  p.dict_payload.pop_back();
  CHECK_THROWS_AS(unpack(p), CorruptPayload);
  p = good;
  p.mask.back() |= 0x8000;  // padding bit: k·d2 = 30 bits in 2 words
  CHECK_THROWS_AS(unpack(p), CorruptPayload);
  p = good;
  p.mask[0] |= 0x0007;  // column 0 now has more than s entries
  CHECK_THROWS_AS(unpack(p), CorruptPayload);
  try {
    p = good;
    p.value_payload.pop_back();
    unpack(p);
  } catch (const CorruptPayload& e) {
    const std::size_t value_offset = 2 * (good.dict_payload.size() + good.mask.size());
    CHECK(e.offset() >= value_offset);
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
}

TEST_CASE("pack rejects codes that break the contract") {
  CompressedFactorization cf;
  cf.dictionary = {DenseMatrix(2, 3), DictionarySpace::activation};
  cf.codes = SparseCodes(4, 2, {SparseColumn{{0}, {1.0}}});
  CHECK_THROWS_AS(pack(cf, 0, MaskMode::with_mask), CorruptCodes);
  cf.codes = SparseCodes(3, 2, {SparseColumn{{0}, {1.0}}});
  CHECK_THROWS_AS(pack(cf, 9, MaskMode::with_mask), InvalidConfig);
}

TEST_CASE("container round trip is byte identical") {
  std::mt19937_64 rng(16);
  auto cf = random_factorization(5, 9, 6, 2, rng);
  auto p = pack(cf, 3, MaskMode::no_mask);
  p.group.members = {"blk0.q", "blk0.k"};
  p.group.layer_cols = {4, 5};
  const auto bytes = serialize(p);
  REQUIRE(bytes.size() > 12);
  CHECK(std::memcmp(bytes.data(), "COSPADI1", 8) == 0);
  const auto q = deserialize(bytes);
  CHECK(q == p);
  CHECK(serialize(q) == bytes);

  const auto dir = std::filesystem::temp_directory_path() / "cospadi_codec_test";
  std::filesystem::create_directories(dir);
  write_cospadi(dir / "x.cospadi", p);
  CHECK(read_cospadi(dir / "x.cospadi") == p);
  std::filesystem::remove_all(dir);

  p.group.members = {"bad,name"};
  CHECK_THROWS_AS(serialize(p), InvalidConfig);
}

TEST_CASE("container error paths") {
  std::mt19937_64 rng(17);
  const auto p = pack(random_factorization(4, 5, 4, 2, rng), 0, MaskMode::with_mask);
  const auto bytes = serialize(p);

  auto cut = bytes;
  cut.resize(bytes.size() - 3);
  CHECK_THROWS_AS(deserialize(cut), CorruptPayload);
  cut.resize(10);
  CHECK_THROWS_AS(deserialize(cut), CorruptPayload);
  auto longer = bytes;
  longer.push_back(0);
  CHECK_THROWS_AS(deserialize(longer), CorruptPayload);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize(bad), NotACospadiFile);
  CHECK_THROWS_AS(deserialize(std::vector<std::uint8_t>{}), NotACospadiFile);

  const std::string text(bytes.begin(), bytes.end());
  const auto pos = text.find("version=1");
  REQUIRE(pos != std::string::npos);
  auto v2 = bytes;
  v2[pos + 8] = '2';
  CHECK_THROWS_AS(deserialize(v2), UnsupportedVersion);
}

TEST_CASE("payload words follow the storage accounting") {
  std::mt19937_64 rng(18);
  std::uniform_int_distribution<std::size_t> dim(2, 40);
  for (int t = 0; t < 50; ++t) {
    const std::size_t d1 = dim(rng), d2 = dim(rng), k = dim(rng);
    const std::size_t s = 1 + rng() % k;
    const auto cf = random_factorization(d1, d2, k, s, rng);
    for (auto mode : {MaskMode::with_mask, MaskMode::no_mask}) {
      const auto p = pack(cf, static_cast<int>(rng() % 8), mode);
      const auto words = sparse_words(d1, d2, k, static_cast<std::uint64_t>(s) * d2, mode);
      CHECK(p.accounted_words() == words);
      CHECK(p.dict_payload.size() == d1 * k);
      CHECK(p.mask.size() == (k * d2 + 15) / 16);
      CHECK(p.value_payload.size() == s * d2);
      for (std::size_t j = 0; j < d2; ++j)
        CHECK(popcount_column(p, j) == static_cast<int>(cf.codes.column(j).nnz()));
    }
  }
}
