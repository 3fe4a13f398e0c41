// SPDX-License-Identifier: Apache-2.0

#include "morq/gam.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include <json.hpp>

#include "morq/formats.hpp"

namespace morq {

GroupMap GroupMap::single_group(size_t num_blocks) {
  return {std::vector<uint32_t>(num_blocks, 0), 1};
}

GroupMap GroupMap::one_block_per_group(size_t num_blocks) {
  GroupMap g;
  g.group_of_block.resize(num_blocks);
  for (size_t i = 0; i < num_blocks; ++i)
    g.group_of_block[i] = static_cast<uint32_t>(i);
  g.num_groups = static_cast<uint32_t>(num_blocks);
  return g;
}

const char* strategy_name(ScalingStrategy s) {
  switch (s) {
    case ScalingStrategy::Gam: return "gam";
    case ScalingStrategy::Fp32Amax: return "amax";
    case ScalingStrategy::E8M0: return "e8m0";
  }
  return "?";
}

ScalingStrategy parse_strategy(std::string_view text) {
  if (text == "gam") return ScalingStrategy::Gam;
  if (text == "amax") return ScalingStrategy::Fp32Amax;
  if (text == "e8m0") return ScalingStrategy::E8M0;
  throw std::invalid_argument("bad strategy: " + std::string(text));
}

namespace {

// Ideal FP32 scale q_amax / amax, with one guarantee the plain division does
// not give: scale * amax never exceeds q_amax. FP32 division rounds to
// nearest, so roughly half the time the quotient lands above the real ratio;
// one ulp down restores the bound while staying within one ulp of the
// correctly rounded quotient. The product check is exact in double.
float scale_div(float q_amax, float amax) {
  float s = q_amax / amax;
  if (static_cast<double>(s) * static_cast<double>(amax) >
      static_cast<double>(q_amax))
    s = std::nextafterf(s, 0.0f);
  return s;
}

struct ScaleFields {
  uint32_t mantissa;
  int biased_exponent;  // may leave [1, 254] for pathological amax
  bool clamped;
};

// mantissa()/exponent() of the ideal scale, as raw FP32 fields. Scales
// outside the FP32 normal range take the nearest normal's fields and are
// flagged.
ScaleFields scale_fields(float q_amax, float amax) {
  if (amax == 0.0f) return {0, 127, false};  // scale 1.0, any value works
  bool overflow = std::isinf(q_amax / amax);
  float s = scale_div(q_amax, amax);
  uint32_t bits;
  static_assert(sizeof bits == sizeof s);
  std::memcpy(&bits, &s, sizeof bits);
  auto biased = static_cast<int>((bits >> 23) & 0xffu);
  uint32_t mant = bits & 0x7fffffu;
  if (biased == 0 || biased == 0xff) {
    // Subnormal or overflowed quotient; representable finite inputs can only
    // hit the overflow side, and the clamped scale still cannot saturate.
    return {mant, biased == 0 ? 1 : 254, true};
  }
  return {mant, biased, overflow};
}

uint8_t clamp_exponent(int biased, bool* clamped) {
  if (biased < 1) {
    *clamped = true;
    return 1;
  }
  if (biased > 254) {
    *clamped = true;
    return 254;
  }
  return static_cast<uint8_t>(biased);
}

}  // namespace

GamScale gam_compute(const TensorF32& t, const std::vector<BlockView>& blocks,
                     const GroupMap& groups, float q_amax) {
  if (!(q_amax > 0.0f)) throw std::invalid_argument("gam: q_amax must be > 0");
  if (groups.group_of_block.size() != blocks.size())
    throw std::invalid_argument("gam: group map does not cover the partition");
  for (uint32_t g : groups.group_of_block)
    if (g >= groups.num_groups)
      throw std::invalid_argument("gam: group id out of range");

  GamScale out;
  out.q_amax = q_amax;
  out.group_of_block = groups.group_of_block;
  out.block_exponents.resize(blocks.size());

  std::vector<float> amax(blocks.size());
  std::vector<float> group_amax(groups.num_groups, 0.0f);
  for (const BlockView& b : blocks) {
    amax[b.block_id] = block_amax(t, b);
    uint32_t g = groups.group_of_block[b.block_id];
    group_amax[g] = std::max(group_amax[g], amax[b.block_id]);
  }

  out.group_mantissas.resize(groups.num_groups);
  for (uint32_t g = 0; g < groups.num_groups; ++g)
    out.group_mantissas[g] = scale_fields(q_amax, group_amax[g]).mantissa;

  for (size_t b = 0; b < blocks.size(); ++b) {
    ScaleFields f = scale_fields(q_amax, amax[b]);
    uint32_t m_g = out.group_mantissas[groups.group_of_block[b]];
    int exponent = f.biased_exponent;
    if (m_g > f.mantissa) --exponent;  // round down to prevent saturation
    bool clamped = f.clamped;
    out.block_exponents[b] = clamp_exponent(exponent, &clamped);
    if (clamped) out.clamped_blocks.push_back(static_cast<uint32_t>(b));
  }
  return out;
}

float gam_reconstruct(const GamScale& s, size_t block_id) {
  if (block_id >= s.block_exponents.size())
    throw std::invalid_argument("gam: unknown block id");
  uint32_t m_g = s.group_mantissas[s.group_of_block[block_id]];
  return compose_fp32({0, s.block_exponents[block_id], m_g});
}

float fp32_amax_scale(float b_amax, float q_amax) {
  if (!(q_amax > 0.0f)) throw std::invalid_argument("scale: q_amax must be > 0");
  if (b_amax == 0.0f) return 1.0f;
  return scale_div(q_amax, b_amax);
}

uint8_t e8m0_scale(float b_amax, float q_amax) {
  if (!(q_amax > 0.0f)) throw std::invalid_argument("scale: q_amax must be > 0");
  if (b_amax == 0.0f) return 127;  // 2^0
  // floor(log2(q/amax)), fixed up with exact double comparisons: 2^k * amax
  // is exact in double for any FP32 amax.
  const double q = q_amax, a = b_amax;
  int k = std::ilogb(q / a);
  while (std::ldexp(a, k) > q) --k;
  while (std::ldexp(a, k + 1) <= q) ++k;
  if (k < -126) k = -126;
  if (k > 127) k = 127;
  return static_cast<uint8_t>(k + 127);
}

BlockScales compute_block_scales(const TensorF32& t,
                                 const std::vector<BlockView>& blocks,
                                 ScalingStrategy strategy, float q_amax) {
  BlockScales out;
  out.scale.resize(blocks.size());
  switch (strategy) {
    case ScalingStrategy::Gam: {
      GroupMap groups = GroupMap::single_group(blocks.size());
      out.gam = gam_compute(t, blocks, groups, q_amax);
      for (size_t b = 0; b < blocks.size(); ++b)
        out.scale[b] = gam_reconstruct(*out.gam, b);
      break;
    }
    case ScalingStrategy::Fp32Amax:
      for (const BlockView& b : blocks)
        out.scale[b.block_id] = fp32_amax_scale(block_amax(t, b), q_amax);
      break;
    case ScalingStrategy::E8M0:
      for (const BlockView& b : blocks)
        out.scale[b.block_id] =
            decode(e8m0_scale(block_amax(t, b), q_amax), FormatKind::E8M0);
      break;
  }
  return out;
}

std::string gam_scale_to_json(const GamScale& s) {
  nlohmann::json j;
  auto& mantissas = j["group_mantissas"] = nlohmann::json::array();
  for (uint32_t m : s.group_mantissas) {
    char hex[12];
    std::snprintf(hex, sizeof hex, "0x%06x", m);
    mantissas.push_back(hex);
  }
  j["block_exponents"] = s.block_exponents;
  j["group_of_block"] = s.group_of_block;
  j["q_amax"] = s.q_amax;
  if (!s.clamped_blocks.empty()) j["clamped_blocks"] = s.clamped_blocks;
  return j.dump();
}

}  // namespace morq
