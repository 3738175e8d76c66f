#pragma once

#include <array>
#include <cstdint>

#include "vcut/numerics/tensor.hpp"

namespace vcut {

// xoshiro256** seeded by expanding a 64-bit seed through SplitMix64. Draws
// depend only on the seed, never on the platform's <random> implementation.
// Single owner: not safe to share between threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double next_double();
  // Uniform in [0, 1) with 24 random bits; always representable as float.
  float next_float();
  // Standard normal via Box-Muller; the second variate is discarded.
  double next_normal();

 private:
  std::array<std::uint64_t, 4> state_;
};

std::uint64_t splitmix64(std::uint64_t& state);

// i.i.d. draws in [lo, hi). Throws ArgumentError unless lo < hi.
Tensor rng_uniform(Rng& rng, double lo, double hi, const Dims& dims, DType dtype = DType::kF32);
Tensor rng_normal(Rng& rng, const Dims& dims, DType dtype = DType::kF32, double mean = 0.0, double stddev = 1.0);

}  // namespace vcut
