#pragma once

#include <cstdint>

#include "esigo/math.hpp"

namespace esigo {

/// Counter-based random generator: every draw is a pure function of
/// (seed, stream, counter), so runs are reproducible bit-for-bit and
/// sub-streams can be consumed in any order without shared state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(mix64(seed ^ 0x657369676f726e67ULL)) {}

  std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const {
    return mix64(mix64(key_ ^ stream) ^ counter);
  }

  /// Uniform draw strictly inside (0,1).
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return (bits(stream, counter) >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  /// Standard normal draw via the inverse CDF.
  double normal(std::uint64_t stream, std::uint64_t counter) const {
    return normal_quantile(uniform(stream, counter));
  }

 private:
  std::uint64_t key_;
};

}  // namespace esigo
