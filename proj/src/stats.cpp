// SPDX-License-Identifier: Apache-2.0

#include "morq/stats.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace morq {

namespace {

// Literal bin edges; bin placement compares against exactly these doubles.
constexpr std::array<double, kHistogramBins> kBoundaries = {
    0.000, 0.005, 0.010, 0.015, 0.020, 0.025,
    0.030, 0.035, 0.040, 0.045, 0.050, 0.055};

}  // namespace

double histogram_bin_boundary(int bin) {
  if (bin < 0 || bin >= kHistogramBins)
    throw std::out_of_range("histogram: bin out of range");
  return kBoundaries[static_cast<size_t>(bin)];
}

int histogram_bin(double rel_error) {
  if (!(rel_error >= 0.0))
    throw std::invalid_argument("histogram: relative error must be >= 0");
  int bin = 0;
  while (bin + 1 < kHistogramBins && rel_error >= kBoundaries[bin + 1]) ++bin;
  return bin;
}

void ErrorHistogram::add(double rel_error) {
  ++bins[static_cast<size_t>(histogram_bin(rel_error))];
  ++total;
}

void ErrorHistogram::merge(const ErrorHistogram& o) {
  for (size_t i = 0; i < bins.size(); ++i) bins[i] += o.bins[i];
  total += o.total;
}

std::array<double, kHistogramBins> ErrorHistogram::normalized() const {
  std::array<double, kHistogramBins> out{};
  if (total == 0) return out;
  for (size_t i = 0; i < bins.size(); ++i)
    out[i] = static_cast<double>(bins[i]) / static_cast<double>(total);
  return out;
}

StatsState::StatsState(uint64_t reset_period) : reset_period_(reset_period) {
  if (reset_period == 0)
    throw std::invalid_argument("stats: reset period must be >= 1");
}

void StatsState::record(const TensorKey& key, uint64_t step, double rel_error,
                        RepType decision) {
  record_error(key, step, rel_error);
  count_decision(key, decision);
}

void StatsState::record_error(const TensorKey& key, uint64_t step,
                              double rel_error) {
  KeyStats& ks = keys_[key];
  uint64_t window = step / reset_period_;
  ErrorHistogram& h = ks.windows[window];
  h.window_start_step = window * reset_period_;
  h.add(rel_error);
}

void StatsState::count_decision(const TensorKey& key, RepType decision) {
  FallbackCounter& f = keys_[key].fallback;
  ++f.decisions_total;
  if (decision == RepType::BF16) ++f.decisions_bf16;
}

void StatsState::flush() { flushed_ = true; }

void StatsState::merge(const StatsState& other) {
  if (other.reset_period_ != reset_period_)
    throw std::invalid_argument("stats: reset periods differ");
  for (const auto& [key, ks] : other.keys_) {
    KeyStats& mine = keys_[key];
    for (const auto& [window, hist] : ks.windows) {
      ErrorHistogram& h = mine.windows[window];
      h.window_start_step = hist.window_start_step;
      h.merge(hist);
    }
    mine.fallback.decisions_total += ks.fallback.decisions_total;
    mine.fallback.decisions_bf16 += ks.fallback.decisions_bf16;
  }
  flushed_ = flushed_ && other.flushed_;
}

size_t StatsState::snapshot_count(const TensorKey& key) const {
  auto it = keys_.find(key);
  if (it == keys_.end()) return 0;
  size_t n = it->second.windows.size();
  if (!flushed_ && n > 0) --n;  // the newest window is still live
  return n;
}

uint64_t StatsState::total_records() const {
  uint64_t n = 0;
  for (const auto& [key, ks] : keys_)
    for (const auto& [window, hist] : ks.windows) n += hist.total;
  return n;
}

Heatmap export_heatmap(const StatsState& s, HeatmapOrdering ordering,
                       const std::optional<TensorKey>& key) {
  Heatmap out;
  if (ordering == HeatmapOrdering::ByTensor) {
    for (const auto& [k, ks] : s.keys()) {
      ErrorHistogram merged;
      for (const auto& [window, hist] : ks.windows) merged.merge(hist);
      out.rows.push_back({k.label(), merged.normalized(), merged.total});
    }
    return out;
  }
  if (!key)
    throw std::invalid_argument("heatmap: per-step export needs a tensor key");
  auto it = s.keys().find(*key);
  if (it == s.keys().end()) return out;
  for (const auto& [window, hist] : it->second.windows)
    out.rows.push_back({std::to_string(hist.window_start_step),
                        hist.normalized(), hist.total});
  return out;
}

std::string heatmap_to_csv(const Heatmap& h) {
  std::string out = "row";
  for (int i = 0; i < kHistogramBins; ++i)
    out += ",bin" + std::to_string(i);
  out += "\n";
  for (const HeatmapRow& row : h.rows) {
    out += row.label;
    for (double v : row.bins) {
      char buf[32];
      std::snprintf(buf, sizeof buf, ",%.9g", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

std::string heatmap_to_json(const Heatmap& h) {
  nlohmann::json j;
  j["bin_width"] = kBinWidth;
  auto& rows = j["rows"] = nlohmann::json::array();
  for (const HeatmapRow& row : h.rows)
    rows.push_back({{"label", row.label},
                    {"bins", row.bins},
                    {"total", row.total}});
  return j.dump(2);
}

std::optional<double> fallback_percentage(
    const StatsState& s, const std::function<bool(const TensorKey&)>& filter) {
  uint64_t total = 0, bf16 = 0;
  for (const auto& [key, ks] : s.keys()) {
    if (filter && !filter(key)) continue;
    total += ks.fallback.decisions_total;
    bf16 += ks.fallback.decisions_bf16;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(bf16) / static_cast<double>(total);
}

std::string fallback_to_json(const StatsState& s) {
  nlohmann::json j;
  auto& per_key = j["per_key"] = nlohmann::json::array();
  uint64_t total = 0, bf16 = 0;
  for (const auto& [key, ks] : s.keys()) {
    total += ks.fallback.decisions_total;
    bf16 += ks.fallback.decisions_bf16;
    per_key.push_back(
        {{"key", key.label()},
         {"decisions_total", ks.fallback.decisions_total},
         {"decisions_bf16", ks.fallback.decisions_bf16},
         {"fraction", ks.fallback.decisions_total
                          ? static_cast<double>(ks.fallback.decisions_bf16) /
                                static_cast<double>(ks.fallback.decisions_total)
                          : 0.0}});
  }
  j["overall"] = {{"decisions_total", total},
                  {"decisions_bf16", bf16},
                  {"fraction", total ? static_cast<double>(bf16) /
                                           static_cast<double>(total)
                                     : 0.0}};
  return j.dump(2);
}

}  // namespace morq
