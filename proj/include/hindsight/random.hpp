#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace hindsight {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent stream seed for one concern (env, init, exploration, ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream * 0x632BE59BD9B4E019ull + 1));
}

enum class Stream : std::uint64_t {
  kEnvironment = 1,
  kInit = 2,
  kExploration = 3,
  kRelabel = 4,
  kDatasetSplit = 5,
  kEvaluation = 6,
  kReplaySampling = 7,
  kHipss = 8,
  kUpdateNoise = 9,
};

inline Rng make_rng(std::uint64_t master, Stream stream) {
  return Rng(derive_seed(master, static_cast<std::uint64_t>(stream)));
}

// Uniform integer in [lo, hi] without depending on the standard library's
// distribution implementation.
inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return lo + static_cast<std::size_t>(v % span);
}

// Uniform double in [0, 1).
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Standard normal via Box-Muller.
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace hindsight
