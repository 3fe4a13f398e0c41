// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "morq/mor.hpp"

namespace morq {

// MAC-level precision accounting for a blocked GEMM. A block pair runs in
// the FP8 class only when both sides are FP8; otherwise its MACs are BF16
// class, and the pair counts as an upcast when exactly one side was FP8.
struct PrecisionCost {
  uint64_t fp8_macs = 0;
  uint64_t bf16_macs = 0;
  uint64_t upcast_blocks = 0;

  uint64_t total_macs() const { return fp8_macs + bf16_macs; }
  // FP8 MACs run at twice the BF16 rate.
  double speedup_estimate() const;

  PrecisionCost& operator+=(const PrecisionCost& o) {
    fp8_macs += o.fp8_macs;
    bf16_macs += o.bf16_macs;
    upcast_blocks += o.upcast_blocks;
    return *this;
  }
};

struct FakeQuantResult {
  TensorF32 output;          // same shape, carries the format's loss
  QuantizedTensor quantized;
};

// Per block: scale, encode to the decided format, decode, descale. BF16
// blocks round through BF16. The output stays in working precision.
FakeQuantResult fake_quantize(const TensorF32& t, const Recipe& recipe,
                              const PartitionSpec& partition,
                              ScalingStrategy strategy);

// Naive triple-loop FP32 multiply-accumulate, k ascending. The deterministic
// reference all emulated GEMMs must match bit-exactly.
TensorF32 reference_gemm(const TensorF32& a, const TensorF32& b);

// One GEMM operand: a quantized tensor (dequantized up front) or an
// unquantized pass-through, which costs in the BF16 class.
class GemmSide {
 public:
  static GemmSide quantized(const QuantizedTensor& q);
  static GemmSide original(const TensorF32& t);

  const TensorF32& values() const { return values_; }
  const std::vector<BlockView>& blocks() const { return blocks_; }
  const std::vector<RepType>& tags() const { return tags_; }

 private:
  explicit GemmSide(TensorF32 values) : values_(std::move(values)) {}
  TensorF32 values_;
  std::vector<BlockView> blocks_;
  std::vector<RepType> tags_;
};

struct GemmResult {
  TensorF32 output;
  PrecisionCost cost;
};

// Emulated mixed-block GEMM: the numeric result is exactly
// reference_gemm(dequant(a), dequant(b)); only the cost depends on the tags.
GemmResult block_gemm(const GemmSide& a, const GemmSide& b);
GemmResult block_gemm(const QuantizedTensor& a, const QuantizedTensor& b);

}  // namespace morq
