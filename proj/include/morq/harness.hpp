// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "morq/fakequant.hpp"
#include "morq/mor.hpp"
#include "morq/stats.hpp"

namespace morq {

enum class BaseDistribution : uint8_t { Gaussian, Lognormal };

// Synthetic tensor stream with controllable per-channel outliers and a
// per-step dynamic-range drift. Fully deterministic given the seed; each
// step's tensor depends only on (seed, step).
struct TensorStreamSpec {
  size_t rows = 128;
  size_t cols = 128;
  uint64_t steps = 1000;
  BaseDistribution base = BaseDistribution::Gaussian;
  double sigma = 1.0;  // gaussian sigma / lognormal log-space sigma
  double mu = 0.0;     // lognormal log-space mean
  double outlier_channel_fraction = 0.0;
  double outlier_magnitude = 1.0;
  // Per-step multiplier on the dynamic range: at step t each draw is spread
  // by drift^(t*u) with u uniform in [0,1], so the range widens by about
  // drift per step while the small-magnitude mass stays put.
  double drift = 1.0;
  uint64_t seed = 0;
  TensorKey key{};

  static TensorStreamSpec from_json(const std::string& text);
  std::string to_json() const;
};

class TensorStream {
 public:
  explicit TensorStream(TensorStreamSpec spec);

  TensorF32 at(uint64_t step) const;
  const TensorStreamSpec& spec() const { return spec_; }
  const std::vector<uint8_t>& outlier_rows() const { return outlier_row_; }

 private:
  TensorStreamSpec spec_;
  std::vector<uint8_t> outlier_row_;  // fixed subset chosen from the seed
};

std::vector<TensorF32> generate_stream(const TensorStreamSpec& spec);

struct ReplayResult {
  StatsState stats;
  std::vector<DecisionRecord> log;
  uint64_t fp8_elements = 0;   // elements shipped in an FP8 payload
  uint64_t bf16_elements = 0;  // elements left in BF16
};

// Streams every step through MoR: one histogram observation, one (or one
// per block) fallback decision, one log line per step. `threads` shards the
// steps; stats merge back in shard order, so the result is independent of
// the thread count.
ReplayResult run_replay(const TensorStream& stream, const Recipe& recipe,
                        const PartitionSpec& partition,
                        ScalingStrategy strategy, uint64_t reset_period = 6000,
                        int threads = 1);

// Replay over pre-recorded tensors (one per step, in order).
ReplayResult run_replay(const std::vector<TensorF32>& tensors,
                        const TensorKey& key, const Recipe& recipe,
                        const PartitionSpec& partition,
                        ScalingStrategy strategy, uint64_t reset_period = 6000);

// Which GEMM operand roles pass through fake quantization.
struct QuantConfig {
  bool enabled = false;  // baseline run when false
  Recipe recipe = Recipe::tensor_level();
  ScalingStrategy strategy = ScalingStrategy::Gam;
  PartitionSpec partition = PartitionSpec::block(128, 128);
  bool quantize_input = true;
  bool quantize_weight = true;
  bool quantize_grad = true;
};

// Least-squares regression against a fixed random teacher network. Baseline
// and quantized runs share initialization and data order.
struct ToyModelConfig {
  std::vector<size_t> layer_sizes = {16, 32, 32, 16, 8};
  uint64_t steps = 400;
  size_t batch = 64;
  float learning_rate = 0.1f;
  double label_noise = 0.05;
  uint64_t seed = 1;
  uint64_t stats_reset_period = 6000;
  QuantConfig quant;

  static ToyModelConfig from_json(const std::string& text);
  std::string to_json() const;
};

struct TrainReport {
  std::vector<float> losses;
  float final_loss = 0.0f;
  bool diverged = false;
  uint64_t divergence_step = 0;
  PrecisionCost cost;
  StatsState stats{6000};

  std::string to_json() const;
};

TrainReport train_toy(const ToyModelConfig& config);

// Largest relative gap between analytic gradients and central finite
// differences on a double-precision replica of the toy model (quantization
// off).
double max_gradient_check_error(const ToyModelConfig& config);

}  // namespace morq
