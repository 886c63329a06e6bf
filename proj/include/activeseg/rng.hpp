#pragma once

#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <cstddef>
#include <random>

namespace activeseg {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and a path of tags,
/// e.g. derive_seed(seed, {trial, round, kForestStream}). Same path, same seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(master);
  for (auto tag : path) s = mix64(s ^ mix64(tag + 0x632be59bd9b4e019ULL));
  return s;
}

inline Engine make_engine(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Engine(derive_seed(master, path));
}

// Stream tags. Keep stable: snapshots rely on them reproducing the same draws.
namespace stream {
inline constexpr std::uint64_t kSeeding = 1;
inline constexpr std::uint64_t kForest = 2;
inline constexpr std::uint64_t kRandomQueries = 3;
inline constexpr std::uint64_t kCotrainSplit = 4;
inline constexpr std::uint64_t kCommittee = 5;
inline constexpr std::uint64_t kIwalSampling = 6;
inline constexpr std::uint64_t kFinalModel = 7;
inline constexpr std::uint64_t kTrial = 8;
inline constexpr std::uint64_t kTree = 9;
}  // namespace stream

/// Uniform double in [0,1) from the top 53 bits; identical on every platform.
inline double uniform01(Engine& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, n) by rejection; identical on every platform.
inline std::size_t uniform_index(Engine& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

/// Standard normal via Box-Muller on uniform01.
inline double standard_normal(Engine& rng) {
  double u1;
  do {
    u1 = uniform01(rng);
  } while (u1 <= 0.0);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Fisher-Yates shuffle on top of uniform_index.
template <class Vec>
void shuffle(Vec& v, Engine& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    using std::swap;
    swap(v[i - 1], v[j]);
  }
}

}  // namespace activeseg
