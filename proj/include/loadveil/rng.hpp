#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

namespace loadveil {

// splitmix64 finalizer; used to derive independent substream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stable seed for a named substream. Every component that consumes
// randomness derives its own stream from the scenario seed and a tag,
// so results do not depend on evaluation order elsewhere.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = mix64(base);
  for (char c : tag) {
    h = mix64(h ^ static_cast<unsigned char>(c));
  }
  return h;
}

// Seeded random stream. All draws are implemented on top of raw 64-bit
// output so that sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  double uniform_range(double lo, double hi) {
    return lo + uniform() * (hi - lo);
  }

  // Integer in [lo, hi], both inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  bool coin() { return (engine_() & 1u) != 0; }

  // Standard normal via Box-Muller.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang; shapes below 1 are boosted.
  double gamma(double shape) {
    if (shape < 0.0 || !std::isfinite(shape)) {
      throw std::invalid_argument("gamma: shape must be nonnegative");
    }
    if (shape == 0.0) return 0.0;  // degenerate point mass at 0
    if (shape < 1.0) {
      const double u = uniform_pos();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x;
      double v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  // Beta(a, b) as a gamma ratio. b == 0 degenerates to 1.
  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    const double s = x + y;
    if (s <= 0.0) return a / (a + b);  // both shapes underflowed
    return x / s;
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace loadveil
