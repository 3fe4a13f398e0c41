// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "morq/rep_type.hpp"
#include "morq/tensor_key.hpp"

namespace morq {

inline constexpr int kHistogramBins = 12;
inline constexpr double kBinWidth = 0.005;

// Lower edge of bin i. Bins are half-open upward: bin i covers
// [boundary(i), boundary(i+1)) for i < 11, bin 11 is open-ended at 0.055.
double histogram_bin_boundary(int bin);
int histogram_bin(double rel_error);

// One accumulation window of per-mini-batch relative-error counts.
struct ErrorHistogram {
  std::array<uint64_t, kHistogramBins> bins{};
  uint64_t total = 0;
  uint64_t window_start_step = 0;

  void add(double rel_error);
  void merge(const ErrorHistogram& o);
  // Row normalization happens here, never in storage, so merges stay exact.
  std::array<double, kHistogramBins> normalized() const;
};

struct FallbackCounter {
  uint64_t decisions_total = 0;
  uint64_t decisions_bf16 = 0;
};

// Per-stream accumulator: windows of reset_period steps (window k holds
// steps [k*period, (k+1)*period)), plus fallback counters over the whole run.
class StatsState {
 public:
  explicit StatsState(uint64_t reset_period = 6000);

  void record(const TensorKey& key, uint64_t step, double rel_error,
              RepType decision);
  // Split form for sub-tensor runs: one histogram observation per mini-batch
  // but one fallback count per block decision.
  void record_error(const TensorKey& key, uint64_t step, double rel_error);
  void count_decision(const TensorKey& key, RepType decision);

  // Close live windows; afterwards every window counts as a snapshot.
  void flush();

  // Workers accumulate privately and merge; integer sums keyed by
  // (key, window) make the result independent of sharding.
  void merge(const StatsState& other);

  uint64_t reset_period() const { return reset_period_; }

  struct KeyStats {
    std::map<uint64_t, ErrorHistogram> windows;  // by window index
    FallbackCounter fallback;
  };
  const std::map<TensorKey, KeyStats>& keys() const { return keys_; }

  // Completed windows for one key (every window but the live one, all of
  // them after flush()).
  size_t snapshot_count(const TensorKey& key) const;
  uint64_t total_records() const;

 private:
  uint64_t reset_period_;
  bool flushed_ = false;
  std::map<TensorKey, KeyStats> keys_;
};

enum class HeatmapOrdering : uint8_t { ByTensor, ByStep };

struct HeatmapRow {
  std::string label;
  std::array<double, kHistogramBins> bins;
  uint64_t total = 0;
};

struct Heatmap {
  std::vector<HeatmapRow> rows;
};

// ByTensor: one row per key, merged over every window (labels follow the
// decoder.layer.* grammar). ByStep: one row per window of a single key,
// labeled by the window's start step.
Heatmap export_heatmap(const StatsState& s, HeatmapOrdering ordering,
                       const std::optional<TensorKey>& key = {});

std::string heatmap_to_csv(const Heatmap& h);
std::string heatmap_to_json(const Heatmap& h);

// BF16 decisions / total decisions over keys matching the filter; empty when
// nothing matches or nothing was recorded.
std::optional<double> fallback_percentage(
    const StatsState& s,
    const std::function<bool(const TensorKey&)>& filter = {});

std::string fallback_to_json(const StatsState& s);

}  // namespace morq
