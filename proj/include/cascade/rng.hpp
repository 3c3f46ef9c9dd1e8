#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>

namespace cascade {

/// SplitMix64 (Steele, Lea, Flood 2014). Used to expand seeds.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman, Vigna). State seeded from SplitMix64 so any
/// 64-bit seed is valid. Every fold plan and split is derived from this
/// generator, making them portable across platforms and standard libraries.
class Xoshiro256StarStar {
 public:
  explicit Xoshiro256StarStar(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform integer in [0, bound) by rejection; bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound);

  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform01();

  /// Standard normal via Box-Muller (no caching of the second variate).
  double normal();

 private:
  std::uint64_t s_[4];
};

/// Mixes a base seed with stream identifiers into an independent seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> streams);

/// Fisher-Yates shuffle driven by xoshiro256**.
template <class T>
void shuffle(std::span<T> items, Xoshiro256StarStar& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace cascade
