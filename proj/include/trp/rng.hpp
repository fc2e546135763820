#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace trp {

/// xoshiro256** seeded deterministically via splitmix64. Used everywhere a
/// random stream is needed so that runs are reproducible across platforms
/// (std::uniform_real_distribution makes no such guarantee).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1), 53-bit mantissa.
  double uniform();
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller (two uniforms per call, no cached spare).
  double normal();

  /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::uint64_t below(std::uint64_t n);

  /// Deterministic Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> state_;
};

}  // namespace trp
