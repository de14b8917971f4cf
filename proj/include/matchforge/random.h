#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace matchforge {

// Seedable generator with derived substreams. Distributions are implemented
// here rather than with <random>'s distribution classes, whose outputs
// differ between standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(Mix(seed)) {}

  // Stream for a (seed, key) combination, e.g. one per work item.
  static Rng Substream(uint64_t seed, uint64_t key) {
    return Rng(Mix(seed) ^ Mix(key + 0x632BE59BD9B4E019ull));
  }

  uint64_t Next() { return engine_(); }

  // Uniform integer in [0, n), n > 0.
  uint64_t UniformIndex(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform double in [0, 1).
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Standard normal (Box-Muller).
  double Normal() {
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  static uint64_t Mix(uint64_t x) {
    // SplitMix64 finalizer.
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace matchforge
