#pragma once

#include <cstdint>
#include <random>

namespace mrtcount {

// splitmix64 finalizer; decorrelates nearby seeds before they reach mt19937_64
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(mix64(seed));
}

// seed for replicate k; depends only on (seed, k) so replicates are
// reproducible independently of ordering or worker count
inline std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t k) {
  return mix64(seed) ^ mix64(k ^ 0x51ed2701a3c49255ull);
}

inline std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t k) {
  return std::mt19937_64(mix64(replicate_seed(seed, k)));
}

}  // namespace mrtcount
