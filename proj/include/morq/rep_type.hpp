// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

namespace morq {

// Representation candidates, most aggressive first. BF16 is the terminal
// fallback and is always accepted.
enum class RepType : uint8_t { E4M3, E5M2, BF16 };

const char* rep_type_name(RepType t);
RepType parse_rep_type(std::string_view text);

inline bool is_fp8(RepType t) {
  return t == RepType::E4M3 || t == RepType::E5M2;
}

}  // namespace morq
