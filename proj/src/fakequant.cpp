// SPDX-License-Identifier: Apache-2.0

#include "morq/fakequant.hpp"

#include <algorithm>
#include <stdexcept>

namespace morq {

double PrecisionCost::speedup_estimate() const {
  double work = static_cast<double>(bf16_macs) +
                static_cast<double>(fp8_macs) / 2.0;
  if (work == 0.0) return 1.0;
  return static_cast<double>(total_macs()) / work;
}

FakeQuantResult fake_quantize(const TensorF32& t, const Recipe& recipe,
                              const PartitionSpec& partition,
                              ScalingStrategy strategy) {
  QuantizedTensor q = mor_quantize(t, recipe, partition, strategy);
  TensorF32 out = dequantize(q);
  out.key = t.key;
  return {std::move(out), std::move(q)};
}

TensorF32 reference_gemm(const TensorF32& a, const TensorF32& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("gemm: inner dimensions do not match");
  TensorF32 out(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i)
    for (size_t j = 0; j < b.cols(); ++j) {
      float acc = 0.0f;
      for (size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

GemmSide GemmSide::quantized(const QuantizedTensor& q) {
  GemmSide side(dequantize(q));
  side.blocks_ = q.blocks;
  side.tags_ = q.decisions;
  return side;
}

GemmSide GemmSide::original(const TensorF32& t) {
  GemmSide side(t);
  side.blocks_ = {{0, 0, t.rows(), 0, t.cols()}};
  side.tags_ = {RepType::BF16};  // never runs in the FP8 class
  return side;
}

namespace {

PrecisionCost pair_costs(const GemmSide& a, const GemmSide& b) {
  PrecisionCost cost;
  for (size_t ai = 0; ai < a.blocks().size(); ++ai) {
    const BlockView& ab = a.blocks()[ai];
    for (size_t bi = 0; bi < b.blocks().size(); ++bi) {
      const BlockView& bb = b.blocks()[bi];
      // MACs shared by the pair: A rows x contraction overlap x B cols.
      size_t k_lo = std::max(ab.col_begin, bb.row_begin);
      size_t k_hi = std::min(ab.col_end, bb.row_end);
      if (k_lo >= k_hi) continue;
      uint64_t macs = static_cast<uint64_t>(ab.rows()) * (k_hi - k_lo) *
                      bb.cols();
      bool a_fp8 = is_fp8(a.tags()[ai]);
      bool b_fp8 = is_fp8(b.tags()[bi]);
      if (a_fp8 && b_fp8) {
        cost.fp8_macs += macs;
      } else {
        cost.bf16_macs += macs;
        if (a_fp8 != b_fp8) ++cost.upcast_blocks;
      }
    }
  }
  return cost;
}

}  // namespace

GemmResult block_gemm(const GemmSide& a, const GemmSide& b) {
  return {reference_gemm(a.values(), b.values()), pair_costs(a, b)};
}

GemmResult block_gemm(const QuantizedTensor& a, const QuantizedTensor& b) {
  return block_gemm(GemmSide::quantized(a), GemmSide::quantized(b));
}

}  // namespace morq
