#include "vcut/numerics/rng.hpp"

#include <cmath>
#include <numbers>

namespace vcut {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& word : state_) word = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

float Rng::next_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

double Rng::next_normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - next_double();
  const double u2 = next_double();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor rng_uniform(Rng& rng, double lo, double hi, const Dims& dims, DType dtype) {
  if (!(lo < hi)) throw ArgumentError("rng_uniform requires lo < hi");
  Tensor out(dims, dtype);
  if (dtype == DType::kF64) {
    for (auto& v : out.data<double>()) {
      double x = lo + (hi - lo) * rng.next_double();
      if (x >= hi) x = std::nextafter(hi, lo);
      v = x;
    }
  } else {
    const auto flo = static_cast<float>(lo);
    const auto fhi = static_cast<float>(hi);
    for (auto& v : out.data<float>()) {
      float x = flo + (fhi - flo) * rng.next_float();
      if (x >= fhi) x = std::nextafter(fhi, flo);
      if (x < flo) x = flo;
      v = x;
    }
  }
  return out;
}

Tensor rng_normal(Rng& rng, const Dims& dims, DType dtype, double mean, double stddev) {
  Tensor out(dims, dtype);
  const std::int64_t n = out.numel();
  for (std::int64_t i = 0; i < n; ++i) out.set(i, mean + stddev * rng.next_normal());
  return out;
}

}  // namespace vcut
