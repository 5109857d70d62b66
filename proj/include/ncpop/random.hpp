#pragma once

// Counter-based Gaussian sampling. Draw i of a stream depends only on
// (seed, i), so sequences are identical across platforms and standard
// libraries.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ncpop {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : key_(splitmix64(seed)) {}

  /// Uniform on (0, 1), never exactly 0.
  double uniform() {
    const std::uint64_t bits = splitmix64(key_ ^ splitmix64(counter_++));
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; both outputs are used.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ncpop
