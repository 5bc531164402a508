#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace risa {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed per pipeline stage so that consuming
// randomness in one stage never shifts another stage's stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the tag
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return mix64(base ^ h);
}

inline std::mt19937_64 make_rng(std::uint64_t base, std::string_view tag) {
  return std::mt19937_64(derive_seed(base, tag));
}

}  // namespace risa
