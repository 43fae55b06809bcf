#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace memrl {

// splitmix64 step; fixed constants, bit-stable across platforms.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Deterministic per-purpose substream derivation. derive_seed(master, "pool/test")
// and derive_seed(master, "pool/test", 3) are unrelated streams for any
// practical purpose; every consumer of randomness names its own tag so that
// adding a consumer never perturbs existing streams.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL + fnv1a64(tag));
  std::uint64_t a = splitmix64(s);
  s ^= index * 0xbf58476d1ce4e5b9ULL + 0x2545f4914f6cdd1dULL;
  std::uint64_t b = splitmix64(s);
  return a ^ (b + 0x9e3779b97f4a7c15ULL);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

}  // namespace memrl
