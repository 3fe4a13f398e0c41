// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "morq/tensor.hpp"

namespace morq {

// Assignment of blocks to mantissa-sharing groups. Group ids are dense
// ordinals 0..num_groups-1.
struct GroupMap {
  std::vector<uint32_t> group_of_block;
  uint32_t num_groups = 0;

  // The default configuration: one group spanning every block, so the whole
  // tensor shares a single 23-bit mantissa.
  static GroupMap single_group(size_t num_blocks);
  static GroupMap one_block_per_group(size_t num_blocks);
};

// Decoupled scale representation: one 23-bit mantissa field per group plus
// one 8-bit exponent code per block. A block's scale factor is reconstructed
// as the FP32 number [sign=0][block exponent][group mantissa].
//
// The exponent is rounded one step down whenever the group mantissa exceeds
// the block's own ideal mantissa, which keeps reconstruct(b) * amax(b) at or
// below q_amax for every block.
struct GamScale {
  std::vector<uint32_t> group_mantissas;  // 23-bit fields, indexed by group
  std::vector<uint8_t> block_exponents;   // E8M0 codes, indexed by block
  std::vector<uint32_t> group_of_block;
  float q_amax = 0.0f;

  // Blocks whose ideal scale fell outside the FP32 normal range and had the
  // exponent clamped to it.
  std::vector<uint32_t> clamped_blocks;

  size_t num_groups() const { return group_mantissas.size(); }
  size_t num_blocks() const { return block_exponents.size(); }
  size_t metadata_bits() const {
    return 23 * group_mantissas.size() + 8 * block_exponents.size();
  }
};

enum class ScalingStrategy : uint8_t { Gam, Fp32Amax, E8M0 };

const char* strategy_name(ScalingStrategy s);
ScalingStrategy parse_strategy(std::string_view text);

// Group amax mantissa scaling. For each group, the scale of the group amax
// donates its mantissa; each block stores only an exponent, rounded down one
// step when the block's ideal mantissa is below the group's.
GamScale gam_compute(const TensorF32& t, const std::vector<BlockView>& blocks,
                     const GroupMap& groups, float q_amax);

float gam_reconstruct(const GamScale& s, size_t block_id);

// Standard per-block FP32 amax scaling: q_amax / b_amax, 1.0 for an all-zero
// block.
float fp32_amax_scale(float b_amax, float q_amax);

// Power-of-two-only scaling: the largest 2^k with 2^k * b_amax <= q_amax,
// returned as an E8M0 code; code for 1.0 when the block is all zeros.
uint8_t e8m0_scale(float b_amax, float q_amax);

// Per-block scale factors for a partition under one strategy (the
// quantization multiplier: scaled = value * scale).
struct BlockScales {
  std::vector<float> scale;
  std::optional<GamScale> gam;  // present for ScalingStrategy::Gam
};

BlockScales compute_block_scales(const TensorF32& t,
                                 const std::vector<BlockView>& blocks,
                                 ScalingStrategy strategy, float q_amax);

std::string gam_scale_to_json(const GamScale& s);

}  // namespace morq
