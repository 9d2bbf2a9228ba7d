#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "common.hpp"

namespace mtg {

// All variate transforms are hand-rolled on top of mt19937_64 so that a given
// seed reproduces the same stream on every standard library implementation
// (std::*_distribution output is implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Uniform index in [0, n). Rejection keeps it unbiased.
  std::size_t index(std::size_t n) {
    require(n > 0, Status::Invalid, "Rng::index: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return static_cast<std::size_t>(v % n);
  }

  // Standard normal via Box-Muller; one spare kept between calls.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Knuth product method, chunked so exp(-mean) never underflows.
  long poisson(double mean) {
    require(mean >= 0.0 && std::isfinite(mean), Status::Invalid,
            "Rng::poisson: mean must be finite and nonnegative");
    long total = 0;
    while (mean > 0.0) {
      const double chunk = mean > 500.0 ? 500.0 : mean;
      mean -= chunk;
      const double threshold = std::exp(-chunk);
      double prod = uniform();
      long k = 0;
      while (prod > threshold) {
        ++k;
        prod *= uniform();
      }
      total += k;
    }
    return total;
  }

  // Derives independent stream seeds from a root seed (splitmix64 step).
  static std::uint64_t derive(std::uint64_t root, std::uint64_t stream) {
    std::uint64_t z = root + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mtg
