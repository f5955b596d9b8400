#pragma once

// Deterministic random source. All sampling goes through explicit conversions
// from mt19937_64 output (std::*_distribution implementations differ between
// standard libraries, which would break cross-build reproducibility).

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace logsieve {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Independent substream keyed by (seed, tags...); used to derive per-epoch
  // and per-sequence streams so pipelined batch assembly stays reproducible.
  static Rng substream(uint64_t seed, uint64_t tag0, uint64_t tag1 = 0) {
    uint64_t s = splitmix64(seed ^ splitmix64(tag0 ^ splitmix64(tag1)));
    return Rng(s);
  }

  uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, bound) via rejection.
  uint64_t uniform_u64(uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_u64: bound must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  int uniform_int(int bound) { return static_cast<int>(uniform_u64(static_cast<uint64_t>(bound))); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform_real() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform_real() < p; }

  // Box-Muller; one spare value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform_real();
    } while (u1 <= 0.0);
    u2 = uniform_real();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    has_spare_ = true;
    return mag * std::cos(two_pi * u2);
  }

  // Normal(0, std) truncated to +/- 2 std, BERT-style init.
  double truncated_normal(double stddev) {
    double x;
    do {
      x = normal();
    } while (x < -2.0 || x > 2.0);
    return x * stddev;
  }

  // Draw k distinct indices from [0, n) by partial Fisher-Yates.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k; ++i) {
      int j = i + uniform_int(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

  // Categorical draw from an unnormalized weight vector.
  int categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("categorical: nonpositive total weight");
    double u = uniform_real() * total;
    double cum = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      cum += weights[i];
      if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size() - 1);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace logsieve
