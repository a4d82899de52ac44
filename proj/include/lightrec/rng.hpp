#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace lightrec {

// Seeded RNG wrapper. mt19937_64 has a standardized output sequence, and all
// distribution transforms are hand-rolled here, so a given seed yields the
// same stream on every platform and stdlib.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1). 53-bit resolution.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller; one spare value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Exponential with the given mean (inverse-CDF transform).
  double exponential(double mean) {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return -mean * std::log(u);
  }

  // Lognormal multiplicative noise factor with unit median: exp(sigma * Z).
  double lognormal_factor(double sigma) {
    if (sigma == 0.0) return 1.0;
    return std::exp(sigma * normal());
  }

  // k distinct indices from [0, n) \ excluded, ascending order not guaranteed.
  // Simple rejection; callers keep k << n.
  std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k,
                                           const std::vector<bool>& excluded) {
    std::vector<std::size_t> out;
    std::vector<bool> taken = excluded;
    out.reserve(k);
    while (out.size() < k) {
      const std::size_t idx = uniform_index(n);
      if (taken[idx]) continue;
      taken[idx] = true;
      out.push_back(idx);
    }
    return out;
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t next_u64() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lightrec
