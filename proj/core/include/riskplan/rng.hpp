#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace riskplan {

// splitmix64 finalizer, used to derive independent seeds from (seed, index)
// pairs. Two rounds keep low-entropy inputs (small integers) well mixed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  for (int round = 0; round < 2; ++round) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
  }
  return x;
}

// Deterministic random stream. mt19937_64 is bit-exact across platforms; the
// std::*_distribution adapters are not, so all transforms are done by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  // Independent child stream, reproducible from (seed, index).
  Rng stream(std::uint64_t index) const { return Rng(mix_seed(seed_, index)); }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller. Consumes two uniforms per call; no cached second value so the
  // stream position stays a pure function of the call count.
  double gaussian() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double gaussian(double mean, double std) { return mean + std * gaussian(); }

  // Marsaglia-Tsang for shape >= 1; boosted by U^{1/a} below 1.
  double gamma(double shape) {
    if (shape < 1.0) {
      double u = uniform01();
      while (u <= 0.0) u = uniform01();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = gaussian();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace riskplan
