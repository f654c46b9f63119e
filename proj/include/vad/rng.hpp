#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace vad {

// Deterministic random stream shared by every seeded component.
//
// Seeding: state = splitmix64(seed), where
//   z = seed + 0x9E3779B97F4A7C15
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   z =  z ^ (z >> 31)
// (a zero result is replaced by 0x9E3779B97F4A7C15).
//
// Stream (xorshift64*):
//   x ^= x >> 12; x ^= x << 25; x ^= x >> 27; out = x * 0x2545F4914F6CDD1D
//
// uniform()  = (out >> 11) * 2^-53                        in [0, 1)
// normal()   = Box-Muller on u1 = 1 - uniform(), u2 = uniform():
//              r = sqrt(-2 ln u1); emits r cos(2 pi u2), then r sin(2 pi u2)
// below(n)   = floor(uniform() * n)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z = z ^ (z >> 31);
    state_ = z != 0 ? z : 0x9E3779B97F4A7C15ULL;
  }

  std::uint64_t next_u64() noexcept {
    std::uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545F4914F6CDD1DULL;
  }

  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sigma) noexcept { return mean + sigma * normal(); }

  std::size_t below(std::size_t n) noexcept {
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

  // Fisher-Yates, walking from the back.
  template <class T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = below(i);
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Sub-seeds are the master seed plus a fixed per-role offset.
namespace seed_offset {
inline constexpr std::uint64_t kSynth = 0;
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kShuffle = 2;
inline constexpr std::uint64_t kForest = 3;
inline constexpr std::uint64_t kTsne = 4;
inline constexpr std::uint64_t kBenchmarkTest = 1000;
}  // namespace seed_offset

}  // namespace vad
