#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sspcache {

// splitmix64: seed derivation for independent substreams.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Thin sampling wrapper: keeps every draw explicit so replays are
// bit-identical for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { // in [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
  // Unit-mean Rayleigh-fading power gain.
  double exp_fading() { return exponential(1.0); }

  // Poisson via Knuth's product method on chunks of bounded mean.
  long long poisson(double mean) {
    long long total = 0;
    while (mean > 16.0) {
      total += poisson_knuth(16.0);
      mean -= 16.0;
    }
    return total + poisson_knuth(mean);
  }

  std::uint64_t raw() { return eng_(); }

 private:
  long long poisson_knuth(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    long long k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  std::mt19937_64 eng_;
};

}  // namespace sspcache
