#pragma once

#include <cstdint>
#include <random>

namespace tiba {

// Stream identifiers for derived RNG substreams. Keeping them fixed keeps
// logs replayable across versions that add new consumers.
enum class Stream : std::uint64_t {
  kScenario = 1,
  kSurface = 2,
  kLidar = 3,
  kThermal = 4,
  kSolar = 5,
  kHt = 6,
  kStart = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream)) ^ index);
}

using Rng = std::mt19937_64;

/// Independent generator for (run seed, stream, frame index).
inline Rng substream(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  return Rng(mix_seed(seed, stream, index));
}

/// Uniform in [0, 1) from a hash; used where no generator state is wanted.
inline double hash_unit(std::uint64_t h) {
  return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

}  // namespace tiba
