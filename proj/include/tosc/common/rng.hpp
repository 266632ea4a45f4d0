#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tosc {

/// splitmix64 finalizer; used to expand one root seed into independent streams.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_label(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based seed splitter: derive(root, "stage", i) is a pure function,
/// so every stage and every item gets a reproducible, independent stream.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stage,
                                    std::uint64_t counter = 0) {
  return mix64(mix64(root ^ hash_label(stage)) + mix64(counter));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, std::string_view stage,
                    std::uint64_t counter = 0) {
  return Rng(derive_seed(root, stage, counter));
}

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  // 53 random bits; avoids implementation-defined distribution objects.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

/// Box-Muller standard normal.
double normal(Rng& rng);

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform(rng) * static_cast<double>(n)) % n;
}

}  // namespace tosc
