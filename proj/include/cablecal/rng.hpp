#pragma once

#include <cstdint>
#include <random>

namespace cablecal {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the substream identified by (seed, tag, a, b). Deterministic and
/// independent of evaluation order, so per-particle draws do not depend on
/// how work is scheduled.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t tag,
                                       std::uint64_t a = 0,
                                       std::uint64_t b = 0) {
  return mix64(mix64(mix64(mix64(seed) ^ tag) ^ a) ^ b);
}

/// Explicitly seeded random stream. There is no global RNG anywhere in the
/// library; every stochastic routine takes one of these.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t seed, std::uint64_t tag,
                       std::uint64_t a = 0, std::uint64_t b = 0) {
    return Rng(substream_seed(seed, tag, a, b));
  }

  /// Uniform on [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    return normal_(engine_) * stddev + mean;
  }

  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

// Stream tags.
inline constexpr std::uint64_t kTagSplit = 0x5350;
inline constexpr std::uint64_t kTagSearch = 0x5345;
inline constexpr std::uint64_t kTagRestart = 0x5253;
inline constexpr std::uint64_t kTagPfInit = 0x5049;
inline constexpr std::uint64_t kTagPfPropagate = 0x5050;
inline constexpr std::uint64_t kTagPfResample = 0x5052;
inline constexpr std::uint64_t kTagPf = 0x5046;
inline constexpr std::uint64_t kTagDeviation = 0x4456;
inline constexpr std::uint64_t kTagConfigs = 0x4346;
inline constexpr std::uint64_t kTagNoise = 0x4e53;

}  // namespace cablecal
