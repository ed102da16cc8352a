#pragma once

// Deterministic random source. Every chain, replicate and worker owns exactly
// one instance; instances are never shared across threads. All samplers are
// implemented on top of the raw engine so draw sequences are reproducible for
// a given seed regardless of platform library internals.

#include <cstdint>
#include <random>

namespace rbc {

class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1), both endpoints excluded.
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the Marsaglia polar method (second draw cached).
  double normal();

  // Exponential with the given rate.
  double exponential(double rate);

  // Gamma(shape, rate) via Marsaglia-Tsang; shape < 1 handled by boosting.
  double gamma(double shape, double rate = 1.0);

  // Chi-squared with one degree of freedom.
  double chi_squared_1() {
    const double z = normal();
    return z * z;
  }

  // Inverse Gaussian(mean, shape), Michael-Schucany-Haas with a
  // cancellation-free update.
  double inverse_gaussian(double mean, double shape);

  // Half-Cauchy C+(0, 1).
  double half_cauchy();

  // SplitMix64-style mixing of a base seed with a stream id, used to derive
  // independent per-chain / per-replicate seeds.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rbc
