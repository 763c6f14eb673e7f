#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mramsim {

// Portable deterministic randomness. Everything here is defined bit-exactly,
// unlike std::normal_distribution, so seeds reproduce across standard libraries.

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a ^ splitmix64(b ^ 0x2545F4914F6CDD1Dull));
}

// Seed for worker/round `index` of an experiment seeded with `master`.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix_key(master, index + 0x5851F42D4C957F2Dull);
}

// Uniform on the open interval (0, 1).
inline constexpr double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

class SplitMixStream {
 public:
  explicit constexpr SplitMixStream(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  double uniform() noexcept { return to_unit_open(next()); }

  // Box-Muller, one variate per call.
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Standard normal restricted to [-bound, bound] by rejection.
  double truncated_normal(double bound) noexcept {
    for (;;) {
      const double z = normal();
      if (std::abs(z) <= bound) return z;
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace mramsim
