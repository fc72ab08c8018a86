#pragma once

#include <cstdint>
#include <random>

namespace fadv {

/// Purpose tags for deriving independent randomness streams from one master
/// seed. A regime that skips a consumer (no attack, no drop masks) still sees
/// the same init and shuffle sequences as one that does not, which is what
/// makes the zero-budget degeneracies land on standard training exactly.
enum class Stream : std::uint64_t {
  ModelInit = 0x9e3779b97f4a7c15ull,
  Shuffle = 0xc2b2ae3d27d4eb4full,
  DropMask = 0x165667b19e3779f9ull,
  AttackInit = 0x27d4eb2f165667c5ull,
  Synthetic = 0x85ebca77c2b2ae63ull,
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Engine for (seed, purpose, index). Same triple, same sequence.
inline std::mt19937_64 make_stream(std::uint64_t seed, Stream purpose, std::uint64_t index = 0) {
  std::uint64_t state = seed ^ static_cast<std::uint64_t>(purpose);
  std::uint64_t a = splitmix64(state);
  state ^= index * 0x2545f4914f6cdd1dull;
  std::uint64_t b = splitmix64(state);
  return std::mt19937_64(a ^ (b << 1));
}

}  // namespace fadv
