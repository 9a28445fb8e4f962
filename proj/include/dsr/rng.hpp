#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dsr {

// Seeded stream with distribution code spelled out here, so draws do not
// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Inversion of the Poisson CDF.
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    int k = 0;
    while (u > cdf && k < 10'000) {
      ++k;
      p *= mean / k;
      cdf += p;
      if (p == 0.0 && cdf < u) break;
    }
    return k;
  }

  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dsr
