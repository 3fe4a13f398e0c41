// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace morq {

enum class FormatKind : uint8_t { E4M3, E5M2, BF16, FP32, E8M0 };

enum class NanConvention : uint8_t { IeeeLike, SinglePattern, None };

// Static description of one numeric format: bit geometry, bias, extrema and
// special-value conventions.
//
// E4M3 follows the OFP8 convention: no infinities, a single NaN pattern per
// sign (all-ones exponent and mantissa), max finite 448. E5M2 keeps
// IEEE-style infinities and NaNs, max finite 57344. E8M0 is an exponent-only
// code: every value is a power of two, code 0xFF is NaN, there is no sign
// bit.
struct FloatFormat {
  FormatKind name;
  int exponent_bits;
  int mantissa_bits;
  int bias;
  float max_finite;
  float min_normal;
  float min_subnormal;
  bool has_infinity;
  NanConvention nan_convention;

  int width() const {
    return (name == FormatKind::E8M0 ? 0 : 1) + exponent_bits + mantissa_bits;
  }
  uint32_t code_mask() const {
    return width() >= 32 ? 0xffffffffu : ((1u << width()) - 1u);
  }

  static const FloatFormat& of(FormatKind kind);
};

const char* format_name(FormatKind kind);

// Raw FP32 bit fields: biased 8-bit exponent code and 23-bit fraction.
struct Fp32Fields {
  uint32_t sign;
  uint32_t exponent_field;
  uint32_t mantissa_field;

  bool operator==(const Fp32Fields&) const = default;
};

// Round-to-nearest-even conversion of an FP32 value into `kind`, saturating:
// finite values beyond max_finite clamp to ±max_finite. NaN maps to the
// format's canonical NaN code, ±Inf to the ±Inf code where the format has one
// and to ±max_finite otherwise. Subnormal targets are fully supported; values
// that round below the smallest subnormal flush to ±0.
//
// E8M0 accepts only positive powers of two (the scaling algorithms pre-round
// to the grid); anything else throws.
uint32_t encode(float value, FormatKind kind);

// Exact value of a bit pattern under the format's semantics. Total: every
// code decodes, possibly to NaN or ±Inf.
float decode(uint32_t code, FormatKind kind);

bool is_nan_code(uint32_t code, FormatKind kind);
bool is_inf_code(uint32_t code, FormatKind kind);

// Field accessors used by the scaling algorithms. Zero, subnormal, NaN and
// Inf are outside the contract of decompose_fp32 and throw.
Fp32Fields decompose_fp32(float x);
float compose_fp32(const Fp32Fields& f);

// Convenience BF16 round trip (RNE, saturating), same semantics as
// encode/decode with FormatKind::BF16.
uint16_t bf16_round(float x);
float bf16_value(uint16_t code);

// Full decode map of an 8-bit format as a JSON array of
// {code, value, class} records; `value` is the exact decimal expansion.
// Intended for cross-checking against external references.
std::string decode_table_json(FormatKind kind);

}  // namespace morq
