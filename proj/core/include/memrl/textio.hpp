#pragma once

#include <cstdio>
#include <string>
#include <string_view>

namespace memrl {

// Round-trip-exact, locale-independent double formatting. All persisted
// numbers (configs, checkpoints, CSV rows) go through this so that a given
// seed/config pair reproduces byte-identical files.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Shorter form for human-facing tables where full precision is noise; still
// deterministic.
inline std::string fmt_double(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace memrl
