#pragma once

// Random streams. Every generator is a std::mt19937_64 seeded from a 64-bit value produced by
// the splitmix64 finalizer. Sub-streams (pixels, trials, grid points) never share a generator:
// their seeds are derive_seed(master, a, b), which depends only on the indices, so results do
// not depend on thread count or scheduling order.

#include <cstdint>
#include <random>

namespace sketchlidar {

/// splitmix64 finalizer (Steele, Lea & Flood).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// seed(master, a, b) = splitmix64(splitmix64(splitmix64(master) ^ a) ^ b).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ a) ^ b);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace sketchlidar
