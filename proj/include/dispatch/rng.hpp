#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

// All randomness flows from a single root seed.  Sub-streams are derived from
// (root, label, index) so that adding a consumer never shifts the draws seen
// by existing consumers, and replays are reproducible bit for bit.
//
// Draw conversion (uniform, exponential) is implemented here instead of using
// std::*_distribution, whose output is implementation-defined.

namespace dispatch {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t derive_seed(uint64_t root, std::string_view label,
                            uint64_t index = 0) {
  uint64_t h = splitmix64(root ^ fnv1a64(label));
  return splitmix64(h ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform on the open interval (0, 1): never returns 0 or 1, so it is safe
  // under log().
  double uniform01() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inverse-CDF exponential draw with the given mean: mean * (-ln U).
  double exponential(double mean) { return mean * -std::log(uniform01()); }

  // Uniform integer in [lo, hi] by rejection-free modulo of a wide draw
  // (bias is negligible at < 2^-32 for the ranges used here, and the result
  // is fully deterministic).
  int64_t uniform_int(int64_t lo, int64_t hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo + 1);
    return lo + static_cast<int64_t>(eng_() % span);
  }

  // Box-Muller; kept local for cross-platform determinism.
  double normal(double mean, double stddev) {
    if (have_spare_) {
      have_spare_ = false;
      return mean + stddev * spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * 3.141592653589793 * u2);
    have_spare_ = true;
    return mean + stddev * r * std::cos(2.0 * 3.141592653589793 * u2);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dispatch
