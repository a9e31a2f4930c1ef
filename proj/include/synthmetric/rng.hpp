#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace synthmetric {

// splitmix64 finalizer; used to scramble seeds and derive substreams.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic random stream. The engine (std::mt19937_64) is bit-exact across
// conforming implementations, and every distribution transform below is written
// out explicitly so that no library-specific distribution code enters results
// that are compared bit-for-bit across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Unbiased integer in [0, n); rejection sampling, n must be positive.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= threshold) return x % n;
    }
  }

  // Standard normal via Box-Muller (no cached spare: one draw consumes exactly
  // two uniforms, which keeps replay simple to reason about).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();  // open interval for the log
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    return r * std::cos(two_pi * u2);
  }

  // Independent stream for replicate/worker `index`, derived from the original
  // seed so that results do not depend on how many draws preceded the fork.
  Rng substream(std::uint64_t index) const {
    return Rng(mix64(seed_ ^ mix64(index + 1)));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace synthmetric
