// SPDX-License-Identifier: Apache-2.0

#include "morq/mor.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "morq/formats.hpp"

namespace morq {

const char* rep_type_name(RepType t) {
  switch (t) {
    case RepType::E4M3: return "e4m3";
    case RepType::E5M2: return "e5m2";
    case RepType::BF16: return "bf16";
  }
  return "?";
}

RepType parse_rep_type(std::string_view text) {
  if (text == "e4m3") return RepType::E4M3;
  if (text == "e5m2") return RepType::E5M2;
  if (text == "bf16") return RepType::BF16;
  throw std::invalid_argument("bad representation type: " + std::string(text));
}

namespace {

constexpr float kQAmaxE4M3 = 448.0f;
constexpr float kQAmaxE5M2 = 57344.0f;

// Eq-4 bound: E5M2 max over its smallest normal, 57344 / 2^-14.
constexpr double kE5M2RangeBound = 57344.0 * 16384.0;

FormatKind fp8_format(RepType t) {
  return t == RepType::E4M3 ? FormatKind::E4M3 : FormatKind::E5M2;
}

}  // namespace

Recipe Recipe::tensor_level(double threshold) {
  Recipe r;
  r.types = {RepType::E4M3, RepType::BF16};
  r.metrics = {MetricKind::MeanRelErrorBelowThreshold};
  r.granularity = Granularity::TensorLevel;
  r.threshold_e4m3 = threshold;
  r.validate();
  return r;
}

Recipe Recipe::two_way() {
  Recipe r;
  r.types = {RepType::E4M3, RepType::BF16};
  r.metrics = {MetricKind::RelErrorE4M3BeatsE5M2};
  r.granularity = Granularity::SubTensorLevel;
  r.validate();
  return r;
}

Recipe Recipe::three_way() {
  Recipe r;
  r.types = {RepType::E4M3, RepType::E5M2, RepType::BF16};
  r.metrics = {MetricKind::RelErrorE4M3BeatsE5M2,
               MetricKind::DynamicRangeFitsE5M2};
  r.granularity = Granularity::SubTensorLevel;
  r.validate();
  return r;
}

Recipe Recipe::parse(std::string_view name, double threshold) {
  if (name == "tensor") return tensor_level(threshold);
  if (name == "two-way") return two_way();
  if (name == "three-way") return three_way();
  throw std::invalid_argument("bad recipe: " + std::string(name));
}

std::string Recipe::name() const {
  if (granularity == Granularity::TensorLevel) return "tensor";
  return types.size() == 3 ? "three-way" : "two-way";
}

void Recipe::validate() const {
  if (types.empty() || types.back() != RepType::BF16)
    throw std::invalid_argument("recipe: BF16 must be the terminal fallback");
  for (size_t i = 1; i < types.size(); ++i)
    if (static_cast<int>(types[i]) <= static_cast<int>(types[i - 1]))
      throw std::invalid_argument(
          "recipe: types must run from most to least aggressive");
  if (metrics.size() != types.size() - 1)
    throw std::invalid_argument("recipe: need one metric per non-final type");
  if (!(threshold_e4m3 > 0.0 && threshold_e4m3 < 1.0))
    throw std::invalid_argument("recipe: threshold must be in (0, 1)");
  if (granularity == Granularity::TensorLevel &&
      (types.size() != 2 ||
       metrics[0] != MetricKind::MeanRelErrorBelowThreshold))
    throw std::invalid_argument(
        "recipe: tensor-level selection is the [E4M3, BF16] mean-error form");
}

float quantize_value(float x, FormatKind fmt, float scale) {
  if (fmt == FormatKind::BF16)
    return decode(encode(x, fmt), fmt);
  float scaled = x * scale;
  float v = decode(encode(scaled, fmt), fmt);
  return v / scale;
}

RelErrorSum rel_error_sum(const TensorF32& t, const BlockView& b,
                          FormatKind fmt, float scale) {
  RelErrorSum out;
  for (size_t r = b.row_begin; r < b.row_end; ++r)
    for (size_t c = b.col_begin; c < b.col_end; ++c) {
      float x = t(r, c);
      if (x == 0.0f) continue;  // also excludes -0
      float q = quantize_value(x, fmt, scale);
      out.sum += std::fabs(static_cast<double>(x) - static_cast<double>(q)) /
                 std::fabs(static_cast<double>(x));
      ++out.nonzero;
    }
  return out;
}

TensorDecision tensor_level_decide(const TensorF32& t,
                                   const PartitionSpec& partition,
                                   ScalingStrategy strategy, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw std::invalid_argument("decide: threshold must be in (0, 1)");
  auto blocks = partition_blocks(t, partition);
  BlockScales scales = compute_block_scales(t, blocks, strategy, kQAmaxE4M3);
  double sum = 0.0;
  size_t n = 0;
  for (const BlockView& b : blocks) {
    RelErrorSum e = rel_error_sum(t, b, FormatKind::E4M3, scales.scale[b.block_id]);
    sum += e.sum;
    n += e.nonzero;
  }
  double global = n ? sum / static_cast<double>(n) : 0.0;
  return {global < threshold ? RepType::E4M3 : RepType::BF16, global};
}

bool subtensor_metric_m1(const TensorF32& t, const BlockView& b,
                         float scale_e4m3, float scale_e5m2) {
  RelErrorSum e4 = rel_error_sum(t, b, FormatKind::E4M3, scale_e4m3);
  RelErrorSum e5 = rel_error_sum(t, b, FormatKind::E5M2, scale_e5m2);
  return e4.sum < e5.sum;
}

bool subtensor_metric_m2(const TensorF32& t, const BlockView& b) {
  auto minabs = nonzero_minabs(t, b);
  if (!minabs) return true;  // vacuous range
  double ratio = static_cast<double>(block_amax(t, b)) /
                 static_cast<double>(*minabs);
  return ratio < kE5M2RangeBound;
}

BlockPayload quantize_block(const TensorF32& t, const BlockView& b,
                            RepType type, float scale) {
  BlockPayload p;
  p.tag = type;
  p.scale = type == RepType::BF16 ? 1.0f : scale;
  if (type == RepType::BF16) {
    p.bf16.reserve(b.size());
    for (size_t r = b.row_begin; r < b.row_end; ++r)
      for (size_t c = b.col_begin; c < b.col_end; ++c)
        p.bf16.push_back(bf16_round(t(r, c)));
  } else {
    FormatKind fmt = fp8_format(type);
    p.fp8.reserve(b.size());
    for (size_t r = b.row_begin; r < b.row_end; ++r)
      for (size_t c = b.col_begin; c < b.col_end; ++c)
        p.fp8.push_back(
            static_cast<uint8_t>(encode(t(r, c) * scale, fmt)));
  }
  return p;
}

QuantizedTensor mor_quantize(const TensorF32& t, const Recipe& recipe,
                             const PartitionSpec& partition,
                             ScalingStrategy strategy) {
  recipe.validate();
  QuantizedTensor q;
  q.rows = t.rows();
  q.cols = t.cols();
  q.partition = partition;
  q.blocks = partition_blocks(t, partition);

  BlockScales scales4 = compute_block_scales(t, q.blocks, strategy, kQAmaxE4M3);
  q.gam = scales4.gam;

  // E4M3 candidate errors drive both the tensor-level decision and the
  // per-tensor statistics, whatever the final tags are.
  std::vector<RelErrorSum> e4(q.blocks.size());
  double sum = 0.0;
  size_t n = 0;
  for (const BlockView& b : q.blocks) {
    e4[b.block_id] =
        rel_error_sum(t, b, FormatKind::E4M3, scales4.scale[b.block_id]);
    sum += e4[b.block_id].sum;
    n += e4[b.block_id].nonzero;
  }
  q.global_rel_error = n ? sum / static_cast<double>(n) : 0.0;
  q.block_rel_errors.resize(q.blocks.size());
  for (size_t b = 0; b < q.blocks.size(); ++b)
    q.block_rel_errors[b] =
        e4[b].nonzero ? e4[b].sum / static_cast<double>(e4[b].nonzero) : 0.0;

  q.payloads.resize(q.blocks.size());
  q.decisions.resize(q.blocks.size());

  if (recipe.granularity == Granularity::TensorLevel) {
    RepType tag = q.global_rel_error < recipe.threshold_e4m3 ? RepType::E4M3
                                                             : RepType::BF16;
    for (const BlockView& b : q.blocks) {
      q.decisions[b.block_id] = tag;
      q.payloads[b.block_id] =
          quantize_block(t, b, tag, scales4.scale[b.block_id]);
    }
    return q;
  }

  BlockScales scales5;
  bool needs_e5m2_scales = false;
  for (MetricKind m : recipe.metrics)
    if (m == MetricKind::RelErrorE4M3BeatsE5M2) needs_e5m2_scales = true;
  for (RepType ty : recipe.types)
    if (ty == RepType::E5M2) needs_e5m2_scales = true;
  if (needs_e5m2_scales)
    scales5 = compute_block_scales(t, q.blocks, strategy, kQAmaxE5M2);

  for (const BlockView& b : q.blocks) {
    size_t i = b.block_id;
    RepType tag = recipe.types.back();
    for (size_t k = 0; k < recipe.types.size(); ++k) {
      if (k == recipe.types.size() - 1) break;  // terminal type, no metric
      bool accept = false;
      switch (recipe.metrics[k]) {
        case MetricKind::RelErrorE4M3BeatsE5M2: {
          RelErrorSum e5 =
              rel_error_sum(t, b, FormatKind::E5M2, scales5.scale[i]);
          accept = e4[i].sum < e5.sum;
          break;
        }
        case MetricKind::DynamicRangeFitsE5M2:
          accept = subtensor_metric_m2(t, b);
          break;
        case MetricKind::MeanRelErrorBelowThreshold:
          accept = (e4[i].nonzero
                        ? e4[i].sum / static_cast<double>(e4[i].nonzero)
                        : 0.0) < recipe.threshold_e4m3;
          break;
      }
      if (accept) {
        tag = recipe.types[k];
        break;
      }
    }
    float scale = tag == RepType::E5M2 ? scales5.scale[i] : scales4.scale[i];
    q.decisions[i] = tag;
    q.payloads[i] = quantize_block(t, b, tag, scale);
  }
  return q;
}

TensorF32 dequantize(const QuantizedTensor& q) {
  TensorF32 out(q.rows, q.cols);
  for (const BlockView& b : q.blocks) {
    const BlockPayload& p = q.payloads[b.block_id];
    size_t i = 0;
    for (size_t r = b.row_begin; r < b.row_end; ++r)
      for (size_t c = b.col_begin; c < b.col_end; ++c, ++i) {
        if (p.tag == RepType::BF16) {
          out(r, c) = bf16_value(p.bf16[i]);
        } else {
          out(r, c) = decode(p.fp8[i], fp8_format(p.tag)) / p.scale;
        }
      }
  }
  return out;
}

std::string decision_record_to_json(const DecisionRecord& r) {
  nlohmann::json j;
  j["tensor_key"] = r.tensor_key;
  j["step"] = r.step;
  j["partition"] = r.partition;
  if (r.decisions.size() == 1) {
    j["decision"] = rep_type_name(r.decisions[0]);
  } else {
    auto& d = j["decisions"] = nlohmann::json::array();
    for (RepType t : r.decisions) d.push_back(rep_type_name(t));
  }
  j["global_rel_error"] = r.global_rel_error;
  if (r.per_block_errors) j["per_block_errors"] = *r.per_block_errors;
  return j.dump();
}

}  // namespace morq
