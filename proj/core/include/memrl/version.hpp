#pragma once

#include <string_view>

namespace memrl {

inline constexpr std::string_view kVersion = "0.1.0";

// Bumped whenever the on-disk layout of configs, checkpoints, dumps or CSV
// outputs changes incompatibly.
inline constexpr int kSchemaVersion = 1;

}  // namespace memrl
