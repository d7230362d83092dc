#pragma once

#include <cstdint>
#include <limits>

namespace asif {

/// xoshiro256** generator. Substreams are keyed by (seed, stream, index) so a
/// given Monte Carlo draw is reproducible regardless of evaluation order.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed);

  /// Independent generator for draw `index` of logical stream `stream`.
  static Rng for_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer on [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t state_[4];
};

/// SplitMix64 finalizer; exposed for deriving sub-seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace asif
