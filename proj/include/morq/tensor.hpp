// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "morq/tensor_key.hpp"

namespace morq {

enum class Axis : uint8_t { Row, Column };

// Scaling granularity. Block dimensions and sub-channel lengths need not
// divide the tensor shape; edge blocks are ragged.
struct PartitionSpec {
  enum class Kind : uint8_t { PerTensor, Block, PerChannel, SubChannel };

  Kind kind = Kind::PerTensor;
  size_t block_rows = 0;  // Block
  size_t block_cols = 0;
  Axis axis = Axis::Row;  // PerChannel / SubChannel
  size_t length = 0;      // SubChannel

  static PartitionSpec per_tensor();
  static PartitionSpec block(size_t rows, size_t cols);
  static PartitionSpec per_channel(Axis axis);
  static PartitionSpec sub_channel(Axis axis, size_t length);

  // "tensor", "block:128x128", "channel:row", "subchannel:row:128"
  std::string to_string() const;
  static PartitionSpec parse(std::string_view text);

  bool operator==(const PartitionSpec&) const = default;
};

struct BlockView {
  size_t block_id = 0;
  size_t row_begin = 0, row_end = 0;  // half-open
  size_t col_begin = 0, col_end = 0;

  size_t rows() const { return row_end - row_begin; }
  size_t cols() const { return col_end - col_begin; }
  size_t size() const { return rows() * cols(); }
};

// Dense row-major 2-D tensor. Construction rejects NaN/Inf payloads.
class TensorF32 {
 public:
  TensorF32(size_t rows, size_t cols);
  TensorF32(size_t rows, size_t cols, std::vector<float> values);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  size_t size() const { return values_.size(); }

  float operator()(size_t r, size_t c) const { return values_[r * cols_ + c]; }
  float& operator()(size_t r, size_t c) { return values_[r * cols_ + c]; }

  const std::vector<float>& values() const { return values_; }
  float* data() { return values_.data(); }
  const float* data() const { return values_.data(); }

  TensorF32 transposed() const;

  std::optional<TensorKey> key;

 private:
  size_t rows_;
  size_t cols_;
  std::vector<float> values_;
};

// Tiles the tensor exactly once, in row-major block order. Deterministic:
// two calls yield identical orderings.
std::vector<BlockView> partition_blocks(const TensorF32& t,
                                        const PartitionSpec& spec);

// max |x| over the block; 0 for an all-zero block.
float block_amax(const TensorF32& t, const BlockView& b);

// min |x| over nonzero elements; empty when the block is all zeros.
std::optional<float> nonzero_minabs(const TensorF32& t, const BlockView& b);

// Binary tensor container: magic "MORT", u16 version, u32 rows, u32 cols,
// then rows*cols little-endian 32-bit floats.
void write_mort(const std::string& path, const TensorF32& t);
TensorF32 read_mort(const std::string& path);

}  // namespace morq
