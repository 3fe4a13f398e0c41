// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "morq/formats.hpp"
#include "morq/gam.hpp"
#include "morq/rep_type.hpp"
#include "morq/tensor.hpp"

namespace morq {

enum class Granularity : uint8_t { TensorLevel, SubTensorLevel };

enum class MetricKind : uint8_t {
  // Mean relative quantization error over nonzero elements < threshold.
  MeanRelErrorBelowThreshold,
  // Total E4M3 relative error < total E5M2 relative error (strict).
  RelErrorE4M3BeatsE5M2,
  // amax / nonzero minabs < 57344 / 2^-14 (the E5M2 normal range).
  DynamicRangeFitsE5M2,
};

// An ordered list of representation types T_1..T_k with acceptance metrics
// M_1..M_{k-1}; the first metric that passes selects the block's type, and
// the last type is accepted unconditionally.
struct Recipe {
  std::vector<RepType> types;
  std::vector<MetricKind> metrics;
  Granularity granularity = Granularity::TensorLevel;
  double threshold_e4m3 = 0.045;

  // [E4M3, BF16], one decision for the whole tensor (mean error vs threshold).
  static Recipe tensor_level(double threshold = 0.045);
  // [E4M3, BF16] per block; E5M2 serves only as the error benchmark.
  static Recipe two_way();
  // [E4M3, E5M2, BF16] per block.
  static Recipe three_way();

  static Recipe parse(std::string_view name, double threshold = 0.045);
  std::string name() const;
  void validate() const;
};

// Encoded form of one block.
struct BlockPayload {
  RepType tag = RepType::BF16;
  float scale = 1.0f;           // multiplier applied before encoding; 1 for BF16
  std::vector<uint8_t> fp8;     // E4M3/E5M2 codes, block-row-major
  std::vector<uint16_t> bf16;   // BF16 codes
};

struct QuantizedTensor {
  size_t rows = 0, cols = 0;
  PartitionSpec partition;
  std::vector<BlockView> blocks;
  std::vector<BlockPayload> payloads;
  std::vector<RepType> decisions;        // == payloads[i].tag
  std::optional<GamScale> gam;           // E4M3-target metadata under GAM
  double global_rel_error = 0.0;         // mean E4M3 relative error (all blocks)
  std::vector<double> block_rel_errors;  // per-block mean E4M3 relative error
};

struct RelErrorSum {
  double sum = 0.0;
  size_t nonzero = 0;
};

// Sum of |x - Q(x)| / |x| over the block's nonzero elements, where
// Q(x) = descale(decode(encode(scale(x)))) for the given format and scale.
RelErrorSum rel_error_sum(const TensorF32& t, const BlockView& b,
                          FormatKind fmt, float scale);

// One element's fake-quantization round trip (the same path the block
// encoders use).
float quantize_value(float x, FormatKind fmt, float scale);

struct TensorDecision {
  RepType type = RepType::BF16;
  double global_error = 0.0;
};

// Eq-2 style global decision: mean relative E4M3 error over the tensor's
// nonzero elements (aggregated across blocks of the partition), E4M3 iff the
// mean is strictly below the threshold. An all-zero tensor has error 0.
TensorDecision tensor_level_decide(const TensorF32& t,
                                   const PartitionSpec& partition,
                                   ScalingStrategy strategy, double threshold);

// M1: quantizing to E4M3 gives strictly lower total relative error than
// quantizing to E5M2. Each format uses its own scale.
bool subtensor_metric_m1(const TensorF32& t, const BlockView& b,
                         float scale_e4m3, float scale_e5m2);

// M2: the block's dynamic range fits the E5M2 normal range. Zeros are
// excluded from the min; an all-zero block passes.
bool subtensor_metric_m2(const TensorF32& t, const BlockView& b);

// Encode one block to a fixed type with a fixed scale (the shared emission
// path for decisions, payloads and fake quantization).
BlockPayload quantize_block(const TensorF32& t, const BlockView& b,
                            RepType type, float scale);

QuantizedTensor mor_quantize(const TensorF32& t, const Recipe& recipe,
                             const PartitionSpec& partition,
                             ScalingStrategy strategy);

TensorF32 dequantize(const QuantizedTensor& q);

// Decision-log line (JSON lines format).
struct DecisionRecord {
  std::string tensor_key;
  uint64_t step = 0;
  std::string partition;
  std::vector<RepType> decisions;
  double global_rel_error = 0.0;
  std::optional<std::vector<double>> per_block_errors;
};

std::string decision_record_to_json(const DecisionRecord& r);

}  // namespace morq
