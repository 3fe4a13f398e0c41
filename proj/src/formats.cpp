// SPDX-License-Identifier: Apache-2.0

#include "morq/formats.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace morq {

namespace {

constexpr float kBf16MaxFinite = 0x1.fep127f;  // 0x7f7f

const FloatFormat kFormats[] = {
    // E4M3: top exponent code is reclaimed for normal values; only the
    // all-ones pattern (0x7f / 0xff) is NaN.
    {FormatKind::E4M3, 4, 3, 7, 448.0f, 0x1p-6f, 0x1p-9f, false,
     NanConvention::SinglePattern},
    {FormatKind::E5M2, 5, 2, 15, 57344.0f, 0x1p-14f, 0x1p-16f, true,
     NanConvention::IeeeLike},
    {FormatKind::BF16, 8, 7, 127, kBf16MaxFinite, 0x1p-126f, 0x1p-133f, true,
     NanConvention::IeeeLike},
    {FormatKind::FP32, 8, 23, 127, 0x1.fffffep127f, 0x1p-126f, 0x1p-149f, true,
     NanConvention::IeeeLike},
    // E8M0: codes 0..254 mean 2^(code-127); 0xFF is NaN.
    {FormatKind::E8M0, 8, 0, 127, 0x1p127f, 0x1p-127f, 0x1p-127f, false,
     NanConvention::SinglePattern},
};

uint32_t exponent_all_ones(const FloatFormat& f) {
  return (1u << f.exponent_bits) - 1u;
}

uint32_t mantissa_all_ones(const FloatFormat& f) {
  return (1u << f.mantissa_bits) - 1u;
}

// Canonical NaN field (exponent+mantissa bits, sign excluded).
uint32_t nan_field(const FloatFormat& f) {
  if (f.nan_convention == NanConvention::SinglePattern)
    return (exponent_all_ones(f) << f.mantissa_bits) | mantissa_all_ones(f);
  // IEEE-like: quiet NaN with the mantissa MSB set.
  return (exponent_all_ones(f) << f.mantissa_bits) |
         (1u << (f.mantissa_bits - 1));
}

uint32_t inf_field(const FloatFormat& f) {
  return exponent_all_ones(f) << f.mantissa_bits;
}

// Field pattern of +max_finite. For E4M3 this sits in the all-ones exponent
// binade (0x7e); for IEEE-like formats it is the last code before Inf.
uint32_t max_finite_field(const FloatFormat& f) {
  if (f.has_infinity)
    return ((exponent_all_ones(f) - 1u) << f.mantissa_bits) |
           mantissa_all_ones(f);
  return (exponent_all_ones(f) << f.mantissa_bits) |
         (mantissa_all_ones(f) - 1u);
}

uint32_t encode_e8m0(float value) {
  if (std::isnan(value)) return 0xffu;
  if (std::isinf(value)) {
    if (value < 0) throw std::invalid_argument("e8m0: negative value");
    return 254u;  // saturate, no infinity code
  }
  if (!(value > 0.0f))
    throw std::invalid_argument("e8m0: value must be a positive power of two");
  int e = std::ilogb(value);
  if (std::ldexp(1.0f, e) != value)
    throw std::invalid_argument("e8m0: value must be a positive power of two");
  if (e < -127) e = -127;
  if (e > 127) e = 127;
  return static_cast<uint32_t>(e + 127);
}

float decode_e8m0(uint32_t code) {
  if (code == 0xffu) return std::bit_cast<float>(0x7fc00000u);
  return std::ldexp(1.0f, static_cast<int>(code) - 127);
}

}  // namespace

const FloatFormat& FloatFormat::of(FormatKind kind) {
  return kFormats[static_cast<size_t>(kind)];
}

const char* format_name(FormatKind kind) {
  switch (kind) {
    case FormatKind::E4M3: return "e4m3";
    case FormatKind::E5M2: return "e5m2";
    case FormatKind::BF16: return "bf16";
    case FormatKind::FP32: return "fp32";
    case FormatKind::E8M0: return "e8m0";
  }
  return "?";
}

uint32_t encode(float value, FormatKind kind) {
  if (kind == FormatKind::FP32) return std::bit_cast<uint32_t>(value);
  if (kind == FormatKind::E8M0) return encode_e8m0(value);

  const FloatFormat& f = FloatFormat::of(kind);
  const int mant = f.mantissa_bits;
  const uint32_t sign_bit = (std::signbit(value) ? 1u : 0u)
                            << (f.exponent_bits + mant);

  if (std::isnan(value)) return sign_bit | nan_field(f);
  if (std::isinf(value))
    return sign_bit | (f.has_infinity ? inf_field(f) : max_finite_field(f));

  // All arithmetic below is exact: an FP32 magnitude is an integer times a
  // power of two with a 24-bit significand, well inside double precision.
  double a = std::fabs(static_cast<double>(value));
  if (a == 0.0) return sign_bit;

  const int emin = 1 - f.bias;  // exponent of the smallest normal
  int e = std::ilogb(a);
  int quantum = (e < emin ? emin : e) - mant;
  double rounded = std::nearbyint(std::ldexp(a, -quantum));  // RNE
  double v = std::ldexp(rounded, quantum);

  if (v > static_cast<double>(f.max_finite)) return sign_bit | max_finite_field(f);
  if (v == 0.0) return sign_bit;

  int ev = std::ilogb(v);
  if (ev < emin) {
    // Subnormal: field is the multiple of the subnormal quantum.
    auto field = static_cast<uint32_t>(std::ldexp(v, mant - emin));
    return sign_bit | field;
  }
  auto biased = static_cast<uint32_t>(ev + f.bias);
  auto m = static_cast<uint32_t>(std::ldexp(v, mant - ev)) - (1u << mant);
  return sign_bit | (biased << mant) | m;
}

float decode(uint32_t code, FormatKind kind) {
  if (kind == FormatKind::FP32) return std::bit_cast<float>(code);
  if (kind == FormatKind::E8M0) return decode_e8m0(code & 0xffu);

  const FloatFormat& f = FloatFormat::of(kind);
  code &= f.code_mask();
  const int mant = f.mantissa_bits;
  const uint32_t sign = code >> (f.exponent_bits + mant);
  const uint32_t biased = (code >> mant) & exponent_all_ones(f);
  const uint32_t m = code & mantissa_all_ones(f);

  if (biased == exponent_all_ones(f)) {
    if (f.nan_convention == NanConvention::SinglePattern) {
      if (m == mantissa_all_ones(f))
        return std::bit_cast<float>(0x7fc00000u | (sign << 31));
      // fall through: reclaimed binade holds normal values
    } else {
      if (m == 0)
        return std::bit_cast<float>(0x7f800000u | (sign << 31));
      return std::bit_cast<float>(0x7fc00000u | (sign << 31));
    }
  }

  float v;
  if (biased == 0) {
    v = std::ldexp(static_cast<float>(m), 1 - f.bias - mant);
  } else {
    v = std::ldexp(static_cast<float>((1u << mant) + m),
                   static_cast<int>(biased) - f.bias - mant);
  }
  return sign ? -v : v;
}

bool is_nan_code(uint32_t code, FormatKind kind) {
  return std::isnan(decode(code, kind));
}

bool is_inf_code(uint32_t code, FormatKind kind) {
  return std::isinf(decode(code, kind));
}

Fp32Fields decompose_fp32(float x) {
  uint32_t bits = std::bit_cast<uint32_t>(x);
  uint32_t biased = (bits >> 23) & 0xffu;
  if (biased == 0 || biased == 0xffu)
    throw std::invalid_argument(
        "decompose_fp32: value must be a normal nonzero float");
  return {bits >> 31, biased, bits & 0x7fffffu};
}

float compose_fp32(const Fp32Fields& f) {
  return std::bit_cast<float>((f.sign << 31) | (f.exponent_field << 23) |
                              (f.mantissa_field & 0x7fffffu));
}

uint16_t bf16_round(float x) {
  return static_cast<uint16_t>(encode(x, FormatKind::BF16));
}

float bf16_value(uint16_t code) { return decode(code, FormatKind::BF16); }

namespace {

// Exact decimal expansion of a finite FP8 value. Every such value is
// n * 2^-f with small n and f <= 16, so the fractional digits are
// n * 5^f zero-padded to f places.
std::string exact_decimal(float value) {
  std::string out;
  double v = value;
  if (std::signbit(value)) {
    out += '-';
    v = -v;
  }
  int frac_bits = 0;
  double scaled = v;
  while (scaled != std::floor(scaled)) {
    scaled *= 2.0;
    ++frac_bits;
  }
  auto n = static_cast<uint64_t>(scaled);
  uint64_t pow5 = 1;
  for (int i = 0; i < frac_bits; ++i) pow5 *= 5;
  uint64_t int_part = n >> frac_bits;
  uint64_t frac_part =
      frac_bits ? (n & ((uint64_t{1} << frac_bits) - 1)) * pow5 : 0;
  out += std::to_string(int_part);
  if (frac_bits) {
    std::string digits = std::to_string(frac_part);
    out += '.';
    out += std::string(static_cast<size_t>(frac_bits) - digits.size(), '0');
    out += digits;
  }
  return out;
}

}  // namespace

std::string decode_table_json(FormatKind kind) {
  if (kind != FormatKind::E4M3 && kind != FormatKind::E5M2)
    throw std::invalid_argument("decode_table_json: 8-bit float formats only");
  nlohmann::json table = nlohmann::json::array();
  for (uint32_t code = 0; code < 256; ++code) {
    float v = decode(code, kind);
    const char* cls;
    if (std::isnan(v)) {
      cls = "nan";
    } else if (std::isinf(v)) {
      cls = "inf";
    } else if (v == 0.0f) {
      cls = "zero";
    } else if (std::fabs(v) < FloatFormat::of(kind).min_normal) {
      cls = "subnormal";
    } else {
      cls = "normal";
    }
    char hex[8];
    std::snprintf(hex, sizeof hex, "0x%02x", code);
    nlohmann::json row = {{"code", hex}, {"class", cls}};
    if (std::isnan(v)) {
      row["value"] = "nan";
    } else if (std::isinf(v)) {
      row["value"] = std::signbit(v) ? "-inf" : "inf";
    } else {
      row["value"] = exact_decimal(v);
    }
    table.push_back(std::move(row));
  }
  return table.dump(2);
}

}  // namespace morq
