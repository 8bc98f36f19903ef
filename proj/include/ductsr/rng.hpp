#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace ductsr {

/// mt19937_64 with hand-rolled distributions. The standard distribution
/// classes are implementation-defined, so results would differ between
/// standard libraries; these sequences are reproducible everywhere.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(gen_() % span);
  }

  std::size_t index(std::size_t size) { return static_cast<std::size_t>(gen_() % size); }

  bool chance(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller; consumes two draws per call.
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

private:
  std::mt19937_64 gen_;
};

}  // namespace ductsr
