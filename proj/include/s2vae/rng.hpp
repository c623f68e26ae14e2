#pragma once

#include <cstdint>
#include <random>

namespace s2vae {

/// Explicit random source. Every sampler takes one of these by reference;
/// there is no global generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  double uniform() { return unit_(engine_); }
  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    double u = unit_(engine_);
    while (u <= 0.0) u = unit_(engine_);
    return u;
  }
  double normal() { return normal_(engine_); }
  std::uint64_t next_u64() { return engine_(); }
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_); }

  std::uint64_t seed() const { return seed_; }

  /// Independent sub-stream derived from this generator's seed and `stream`.
  /// Does not advance this generator.
  Rng split(std::uint64_t stream) const { return Rng(mix(seed_, stream)); }

  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace s2vae
