// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cmath>
#include <random>

#include <doctest.h>
#include <json.hpp>

#include "morq/formats.hpp"
#include "support/oracles.hpp"

using namespace morq;
using morq::testing::oracle_bf16_bits;
using morq::testing::oracle_encode;
using morq::testing::oracle_table;

namespace {

bool same_bits(float a, float b) {
  return std::bit_cast<uint32_t>(a) == std::bit_cast<uint32_t>(b);
}

std::vector<float> finite_values(FormatKind kind) {
  std::vector<float> out;
  for (uint32_t c = 0; c < 256; ++c) {
    float v = oracle_table(kind)[c];
    if (std::isfinite(v)) out.push_back(v);
  }
  return out;
}

}  // namespace

TEST_CASE("format metadata matches the published extrema") {
  const auto& e4m3 = FloatFormat::of(FormatKind::E4M3);
  CHECK(e4m3.max_finite == 448.0f);
  CHECK(e4m3.min_subnormal == 0x1p-9f);
  CHECK(e4m3.min_normal == 0x1p-6f);
  CHECK_FALSE(e4m3.has_infinity);
  CHECK(e4m3.nan_convention == NanConvention::SinglePattern);

  const auto& e5m2 = FloatFormat::of(FormatKind::E5M2);
  CHECK(e5m2.max_finite == 57344.0f);
  CHECK(e5m2.min_normal == 0x1p-14f);
  CHECK(e5m2.min_subnormal == 0x1p-16f);
  CHECK(e5m2.has_infinity);

  for (FormatKind k : {FormatKind::E4M3, FormatKind::E5M2, FormatKind::BF16}) {
    const auto& f = FloatFormat::of(k);
    // The extrema are exactly representable: they survive a round trip.
    CHECK(decode(encode(f.max_finite, k), k) == f.max_finite);
    CHECK(decode(encode(f.min_normal, k), k) == f.min_normal);
    CHECK(decode(encode(f.min_subnormal, k), k) == f.min_subnormal);
  }
}

TEST_CASE("e4m3/e5m2 decode matches the enumeration oracle on all codes") {
  for (FormatKind k : {FormatKind::E4M3, FormatKind::E5M2}) {
    for (uint32_t c = 0; c < 256; ++c) {
      float got = decode(c, k);
      float want = oracle_table(k)[c];
      if (std::isnan(want)) {
        CHECK(std::isnan(got));
      } else {
        CHECK(same_bits(got, want));
      }
    }
  }
}

TEST_CASE("exhaustive round trip: encode(decode(c)) == c") {
  // NaN payloads collapse to the canonical pattern; everything else,
  // including -0, round-trips bit-exactly.
  for (FormatKind k : {FormatKind::E4M3, FormatKind::E5M2}) {
    for (uint32_t c = 0; c < 256; ++c) {
      float v = decode(c, k);
      uint32_t back = encode(v, k);
      if (std::isnan(v)) {
        uint32_t canonical = k == FormatKind::E4M3 ? 0x7fu : 0x7eu;
        CHECK(back == ((c & 0x80u) | canonical));
      } else {
        CHECK(back == c);
      }
    }
  }
}

TEST_CASE("encode agrees with the nearest-scan oracle") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mag(-20.0, 20.0);
  std::uniform_real_distribution<double> sgn(-1.0, 1.0);
  for (FormatKind k : {FormatKind::E4M3, FormatKind::E5M2}) {
    for (int i = 0; i < 100000; ++i) {
      float x = static_cast<float>(std::copysign(std::exp2(mag(rng)), sgn(rng)));
      CAPTURE(x);
      CHECK(encode(x, k) == oracle_encode(x, k));
    }
    // Specials and boundaries.
    const float inf = std::numeric_limits<float>::infinity();
    for (float x : {0.0f, -0.0f, 448.0f, -448.0f, 464.0f, 465.0f, 1e10f,
                    -1e10f, 57344.0f, 60000.0f, 0x1p-140f, -0x1p-140f,
                    std::numeric_limits<float>::denorm_min()}) {
      CHECK(encode(x, k) == oracle_encode(x, k));
    }
    CHECK(encode(inf, k) == oracle_encode(inf, k));
    CHECK(encode(-inf, k) == oracle_encode(-inf, k));
    CHECK(encode(std::numeric_limits<float>::quiet_NaN(), k) ==
          oracle_encode(std::numeric_limits<float>::quiet_NaN(), k));
  }
}

TEST_CASE("round-to-nearest-even at every midpoint of adjacent values") {
  for (FormatKind k : {FormatKind::E4M3, FormatKind::E5M2}) {
    std::vector<float> vals = finite_values(k);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (size_t i = 0; i + 1 < vals.size(); ++i) {
      // The midpoint of adjacent values is exactly representable in FP32.
      float mid = static_cast<float>(
          (static_cast<double>(vals[i]) + static_cast<double>(vals[i + 1])) /
          2.0);
      uint32_t code = encode(mid, k);
      CHECK(code == oracle_encode(mid, k));
      // The tie must land on an even mantissa.
      CHECK((code & 1u) == 0u);
    }
  }
}

TEST_CASE("published values: saturation, rounding, extrema") {
  CHECK(decode(encode(448.0f, FormatKind::E4M3), FormatKind::E4M3) == 448.0f);
  CHECK(encode(0.0f, FormatKind::E4M3) == 0u);
  CHECK(same_bits(decode(0, FormatKind::E4M3), 0.0f));
  CHECK(encode(500.0f, FormatKind::E4M3) == encode(448.0f, FormatKind::E4M3));
  // 3.1 sits between 3.0 and 3.25; 3.0 is nearer.
  CHECK(decode(encode(3.1f, FormatKind::E4M3), FormatKind::E4M3) == 3.0f);
  CHECK(decode(0b0'11110'11u, FormatKind::E5M2) == 57344.0f);
  CHECK(decode(0b0'0000'001u, FormatKind::E4M3) == 0x1p-9f);
}

TEST_CASE("monotone and idempotent") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(-18.0, 18.0);
  std::uniform_real_distribution<double> sgn(-1.0, 1.0);
  for (FormatKind k : {FormatKind::E4M3, FormatKind::E5M2, FormatKind::BF16}) {
    for (int i = 0; i < 20000; ++i) {
      float a = static_cast<float>(std::copysign(std::exp2(mag(rng)), sgn(rng)));
      float b = static_cast<float>(std::copysign(std::exp2(mag(rng)), sgn(rng)));
      if (a > b) std::swap(a, b);
      float qa = decode(encode(a, k), k);
      float qb = decode(encode(b, k), k);
      CHECK(qa <= qb);
      CHECK(encode(qa, k) == encode(a, k));
    }
  }
}

TEST_CASE("negative zero keeps its pattern") {
  CHECK(encode(-0.0f, FormatKind::E4M3) == 0x80u);
  CHECK(encode(-0.0f, FormatKind::E5M2) == 0x80u);
  CHECK(encode(-0.0f, FormatKind::BF16) == 0x8000u);
  CHECK(std::signbit(decode(0x80u, FormatKind::E4M3)));
  CHECK(decode(0x80u, FormatKind::E4M3) == 0.0f);
}

TEST_CASE("infinity handling per format") {
  const float inf = std::numeric_limits<float>::infinity();
  // No infinity in E4M3: clamps to the max.
  CHECK(decode(encode(inf, FormatKind::E4M3), FormatKind::E4M3) == 448.0f);
  CHECK(decode(encode(-inf, FormatKind::E4M3), FormatKind::E4M3) == -448.0f);
  CHECK(std::isinf(decode(encode(inf, FormatKind::E5M2), FormatKind::E5M2)));
  CHECK(decode(encode(-inf, FormatKind::E5M2), FormatKind::E5M2) < 0);
  CHECK(std::isinf(decode(encode(inf, FormatKind::BF16), FormatKind::BF16)));
}

TEST_CASE("bf16 conversion matches the shift-with-round-bit oracle") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> mag(-130.0, 130.0);
  std::uniform_real_distribution<double> sgn(-1.0, 1.0);
  for (int i = 0; i < 100000; ++i) {
    float x = static_cast<float>(std::copysign(std::exp2(mag(rng)), sgn(rng)));
    CAPTURE(x);
    CHECK(bf16_round(x) == oracle_bf16_bits(x));
  }
  for (float x : {0.0f, -0.0f, 0x1.fep127f, 0x1.ffp127f,
                  std::numeric_limits<float>::max(),
                  std::numeric_limits<float>::denorm_min(), 1.0f, -1.0f}) {
    CAPTURE(x);
    CHECK(bf16_round(x) == oracle_bf16_bits(x));
  }
  CHECK(bf16_value(bf16_round(1.0f)) == 1.0f);
}

TEST_CASE("e8m0 codes are pure powers of two") {
  for (int e = -127; e <= 127; ++e) {
    float v = std::ldexp(1.0f, e);
    uint32_t code = encode(v, FormatKind::E8M0);
    CHECK(code == static_cast<uint32_t>(e + 127));
    CHECK(decode(code, FormatKind::E8M0) == v);
  }
  CHECK_THROWS_AS(encode(3.0f, FormatKind::E8M0), std::invalid_argument);
  CHECK_THROWS_AS(encode(-2.0f, FormatKind::E8M0), std::invalid_argument);
  CHECK_THROWS_AS(encode(0.0f, FormatKind::E8M0), std::invalid_argument);
  CHECK(std::isnan(decode(0xffu, FormatKind::E8M0)));
  CHECK(encode(std::numeric_limits<float>::quiet_NaN(), FormatKind::E8M0) ==
        0xffu);
}

TEST_CASE("fp32 field decomposition is exact") {
  CHECK(decompose_fp32(1.0f) == Fp32Fields{0, 127, 0});
  CHECK(decompose_fp32(1.5f) == Fp32Fields{0, 127, 0x400000});
  CHECK(compose_fp32({0, 128, 0}) == 2.0f);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> mag(-126.0, 127.0);
  std::uniform_real_distribution<double> sgn(-1.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    float x = static_cast<float>(std::copysign(std::exp2(mag(rng)), sgn(rng)));
    CHECK(same_bits(compose_fp32(decompose_fp32(x)), x));
  }

  CHECK_THROWS_AS(decompose_fp32(0.0f), std::invalid_argument);
  CHECK_THROWS_AS(decompose_fp32(0x1p-130f), std::invalid_argument);
  CHECK_THROWS_AS(decompose_fp32(std::numeric_limits<float>::infinity()),
                  std::invalid_argument);
  CHECK_THROWS_AS(decompose_fp32(std::numeric_limits<float>::quiet_NaN()),
                  std::invalid_argument);
}

TEST_CASE("decode tables serialize with exact decimal values") {
  auto table = nlohmann::json::parse(decode_table_json(FormatKind::E4M3));
  REQUIRE(table.size() == 256);
  CHECK(table[0x01]["value"] == "0.001953125");  // 2^-9
  CHECK(table[0x01]["class"] == "subnormal");
  CHECK(table[0x7e]["value"] == "448");
  CHECK(table[0x7e]["class"] == "normal");
  CHECK(table[0x7f]["class"] == "nan");
  CHECK(table[0x00]["class"] == "zero");

  auto e5m2 = nlohmann::json::parse(decode_table_json(FormatKind::E5M2));
  CHECK(e5m2[0x7b]["value"] == "57344");
  CHECK(e5m2[0x7c]["class"] == "inf");
  CHECK(e5m2[0x01]["value"] == "0.0000152587890625");  // 2^-16
}
