#pragma once

#include <cstdint>
#include <initializer_list>

namespace al {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic child seed for a named sub-stream of `parent`.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(parent);
  for (auto p : path) s = mix64(s ^ mix64(p + 0x632BE59BD9B4E019ULL));
  return s;
}

}  // namespace al
