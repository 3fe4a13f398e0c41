// SPDX-License-Identifier: Apache-2.0

#include "morq/tensor.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace morq {

std::string TensorKey::label() const {
  std::string s = "decoder.layer." + std::to_string(layer_index) + "." +
                  module_name(module) + "." + role_name(role);
  if (direction == PartitionDirection::RowPartition) s += ".row";
  if (direction == PartitionDirection::ColPartition) s += ".col";
  return s;
}

const char* module_name(LinearModule m) {
  switch (m) {
    case LinearModule::LinearQkv: return "linear_qkv";
    case LinearModule::LinearProj: return "linear_proj";
    case LinearModule::Fc1: return "fc1";
    case LinearModule::Fc2: return "fc2";
  }
  return "?";
}

const char* role_name(TensorRole r) {
  switch (r) {
    case TensorRole::Input: return "input";
    case TensorRole::Weight: return "weight";
    case TensorRole::Grad: return "grad";
  }
  return "?";
}

PartitionSpec PartitionSpec::per_tensor() { return {}; }

PartitionSpec PartitionSpec::block(size_t rows, size_t cols) {
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("partition: block dims must be >= 1");
  PartitionSpec s;
  s.kind = Kind::Block;
  s.block_rows = rows;
  s.block_cols = cols;
  return s;
}

PartitionSpec PartitionSpec::per_channel(Axis axis) {
  PartitionSpec s;
  s.kind = Kind::PerChannel;
  s.axis = axis;
  return s;
}

PartitionSpec PartitionSpec::sub_channel(Axis axis, size_t length) {
  if (length == 0)
    throw std::invalid_argument("partition: sub-channel length must be >= 1");
  PartitionSpec s;
  s.kind = Kind::SubChannel;
  s.axis = axis;
  s.length = length;
  return s;
}

std::string PartitionSpec::to_string() const {
  switch (kind) {
    case Kind::PerTensor:
      return "tensor";
    case Kind::Block:
      return "block:" + std::to_string(block_rows) + "x" +
             std::to_string(block_cols);
    case Kind::PerChannel:
      return std::string("channel:") + (axis == Axis::Row ? "row" : "col");
    case Kind::SubChannel:
      return std::string("subchannel:") + (axis == Axis::Row ? "row" : "col") +
             ":" + std::to_string(length);
  }
  return "?";
}

PartitionSpec PartitionSpec::parse(std::string_view text) {
  auto fail = [&] {
    throw std::invalid_argument("bad partition spec: " + std::string(text));
  };
  auto parse_count = [&](std::string_view s) -> size_t {
    size_t v = 0;
    if (s.empty()) fail();
    for (char c : s) {
      if (c < '0' || c > '9') fail();
      v = v * 10 + static_cast<size_t>(c - '0');
    }
    return v;
  };
  if (text == "tensor") return per_tensor();
  if (text.starts_with("block:")) {
    auto dims = text.substr(6);
    auto x = dims.find('x');
    if (x == std::string_view::npos) fail();
    return block(parse_count(dims.substr(0, x)), parse_count(dims.substr(x + 1)));
  }
  if (text.starts_with("channel:")) {
    auto a = text.substr(8);
    if (a == "row") return per_channel(Axis::Row);
    if (a == "col") return per_channel(Axis::Column);
    fail();
  }
  if (text.starts_with("subchannel:")) {
    auto rest = text.substr(11);
    auto colon = rest.find(':');
    if (colon == std::string_view::npos) fail();
    auto a = rest.substr(0, colon);
    Axis axis = Axis::Row;
    if (a == "row") {
      axis = Axis::Row;
    } else if (a == "col") {
      axis = Axis::Column;
    } else {
      fail();
    }
    return sub_channel(axis, parse_count(rest.substr(colon + 1)));
  }
  fail();
  return {};
}

namespace {

void check_values(const std::vector<float>& values) {
  for (float v : values)
    if (!std::isfinite(v))
      throw std::invalid_argument("tensor: values must be finite");
}

}  // namespace

TensorF32::TensorF32(size_t rows, size_t cols)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0f) {
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("tensor: empty shape");
}

TensorF32::TensorF32(size_t rows, size_t cols, std::vector<float> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("tensor: empty shape");
  if (values_.size() != rows * cols)
    throw std::invalid_argument("tensor: value count does not match shape");
  check_values(values_);
}

TensorF32 TensorF32::transposed() const {
  TensorF32 out(cols_, rows_);
  for (size_t r = 0; r < rows_; ++r)
    for (size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
  out.key = key;
  return out;
}

std::vector<BlockView> partition_blocks(const TensorF32& t,
                                        const PartitionSpec& spec) {
  std::vector<BlockView> blocks;
  const size_t rows = t.rows(), cols = t.cols();
  auto push = [&](size_t r0, size_t r1, size_t c0, size_t c1) {
    blocks.push_back({blocks.size(), r0, r1, c0, c1});
  };
  switch (spec.kind) {
    case PartitionSpec::Kind::PerTensor:
      push(0, rows, 0, cols);
      break;
    case PartitionSpec::Kind::Block:
      for (size_t r = 0; r < rows; r += spec.block_rows)
        for (size_t c = 0; c < cols; c += spec.block_cols)
          push(r, std::min(r + spec.block_rows, rows), c,
               std::min(c + spec.block_cols, cols));
      break;
    case PartitionSpec::Kind::PerChannel:
      if (spec.axis == Axis::Row) {
        for (size_t r = 0; r < rows; ++r) push(r, r + 1, 0, cols);
      } else {
        for (size_t c = 0; c < cols; ++c) push(0, rows, c, c + 1);
      }
      break;
    case PartitionSpec::Kind::SubChannel:
      if (spec.axis == Axis::Row) {
        for (size_t r = 0; r < rows; ++r)
          for (size_t c = 0; c < cols; c += spec.length)
            push(r, r + 1, c, std::min(c + spec.length, cols));
      } else {
        for (size_t c = 0; c < cols; ++c)
          for (size_t r = 0; r < rows; r += spec.length)
            push(r, std::min(r + spec.length, rows), c, c + 1);
      }
      break;
  }
  return blocks;
}

float block_amax(const TensorF32& t, const BlockView& b) {
  float amax = 0.0f;
  for (size_t r = b.row_begin; r < b.row_end; ++r)
    for (size_t c = b.col_begin; c < b.col_end; ++c)
      amax = std::max(amax, std::fabs(t(r, c)));
  return amax;
}

std::optional<float> nonzero_minabs(const TensorF32& t, const BlockView& b) {
  std::optional<float> m;
  for (size_t r = b.row_begin; r < b.row_end; ++r)
    for (size_t c = b.col_begin; c < b.col_end; ++c) {
      float a = std::fabs(t(r, c));
      if (a > 0.0f && (!m || a < *m)) m = a;
    }
  return m;
}

namespace {

constexpr char kMortMagic[4] = {'M', 'O', 'R', 'T'};
constexpr uint16_t kMortVersion = 1;

// Host is little-endian on every supported target; serialize fields directly.
template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::ifstream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T)))
    throw std::runtime_error("mort: truncated file");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_mort(const std::string& path, const TensorF32& t) {
  std::string out;
  out.append(kMortMagic, 4);
  put(out, kMortVersion);
  put(out, static_cast<uint32_t>(t.rows()));
  put(out, static_cast<uint32_t>(t.cols()));
  for (float v : t.values()) put(out, v);

  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size())))
      throw std::runtime_error("mort: cannot write " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("mort: cannot rename " + tmp);
}

TensorF32 read_mort(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("mort: cannot open " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, kMortMagic, 4) != 0)
    throw std::runtime_error("mort: bad magic in " + path);
  auto version = take<uint16_t>(f);
  if (version != kMortVersion)
    throw std::runtime_error("mort: unsupported version in " + path);
  auto rows = take<uint32_t>(f);
  auto cols = take<uint32_t>(f);
  if (rows == 0 || cols == 0)
    throw std::runtime_error("mort: empty shape in " + path);
  std::vector<float> values(static_cast<size_t>(rows) * cols);
  for (auto& v : values) v = take<float>(f);
  return TensorF32(rows, cols, std::move(values));
}

}  // namespace morq
