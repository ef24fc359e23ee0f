#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "panograph/pose2.hpp"

namespace panograph {

// Seeded RNG with hand-rolled distributions. mt19937_64 output is fixed by
// the standard and the transforms below avoid std::*_distribution, whose
// results vary across standard library implementations; a fixed seed yields
// the same stream everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n), unbiased via rejection.
  std::uint64_t uniform_u64(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x < threshold);
    return x % n;
  }

  int uniform_int(int n) { return static_cast<int>(uniform_u64(static_cast<std::uint64_t>(n))); }

  // Standard normal via Box-Muller, one spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the log finite.
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return mag * std::cos(kTwoPi * u2);
  }

  double normal(double sigma) { return sigma * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = uniform_u64(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace panograph
