#pragma once

#include <cstdint>
#include <numbers>
#include <random>

namespace stbell {

/// Default seed used by every entry point that does not receive one.
inline constexpr std::uint64_t kDefaultSeed = 20010227ULL;

/// SplitMix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed-split function: the seed of sub-stream `stream` of a source seeded
/// with `seed`. Distinct (seed, stream) pairs map to well-mixed seeds.
constexpr std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/*!
 * Seedable deterministic random source.
 *
 * Wraps std::mt19937_64 and converts raw words to doubles by hand so that the
 * stream is identical across standard library implementations (the standard
 * distributions are not). Single owner: share by calling split().
 */
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed = kDefaultSeed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent source for sub-stream `stream`.
  RandomSource split(std::uint64_t stream) const { return RandomSource(split_seed(seed_, stream)); }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform on [0, 2*pi).
  double uniform_angle() { return 2.0 * std::numbers::pi * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n), n > 0.
  std::uint32_t index(std::uint32_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::uint32_t>(x % n);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace stbell
