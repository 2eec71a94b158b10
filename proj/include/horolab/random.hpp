#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace horolab {

/// Seeded generator with platform-independent real draws (the std distributions are
/// implementation-defined, which would break replay across toolchains).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    double u1 = uniform();
    while (u1 <= 0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
  }
  bool coin() { return (eng_() >> 63) != 0; }
  std::uint64_t next() { return eng_(); }

  /// Independent child stream, for per-experiment seeding.
  Rng split(std::uint64_t salt) { return Rng(eng_() ^ (salt * 0x9E3779B97F4A7C15ULL)); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace horolab
