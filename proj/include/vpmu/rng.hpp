#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vpmu {

using Rng = std::mt19937_64;

/// Seed split scheme: every stochastic source draws from its own generator,
/// seeded with splitmix64(root ^ fnv1a(label) + index). Adding a source never
/// perturbs the others.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(root ^ fnv1a(label)) + index);
}

inline Rng make_rng(std::uint64_t root, std::string_view label, std::uint64_t index = 0) {
  return Rng(derive_seed(root, label, index));
}

}  // namespace vpmu
