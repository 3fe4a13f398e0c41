// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace morq {

enum class LinearModule : uint8_t { LinearQkv, LinearProj, Fc1, Fc2 };
enum class TensorRole : uint8_t { Input, Weight, Grad };
enum class PartitionDirection : uint8_t { RowPartition, ColPartition, NotApplicable };
enum class Pass : uint8_t { Forward, Backward };

// Identity of one tracked tensor stream. The label follows
// decoder.layer.{n}.{module}.{role}[.{row|col}]; the pass disambiguates
// forward/backward bookkeeping but is not part of the label.
struct TensorKey {
  uint32_t layer_index = 0;
  LinearModule module = LinearModule::Fc1;
  TensorRole role = TensorRole::Input;
  PartitionDirection direction = PartitionDirection::NotApplicable;
  Pass pass = Pass::Forward;

  std::string label() const;

  auto operator<=>(const TensorKey&) const = default;
};

const char* module_name(LinearModule m);
const char* role_name(TensorRole r);

}  // namespace morq
