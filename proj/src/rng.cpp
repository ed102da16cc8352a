#include "rbc/rng.hpp"

#include <cmath>

namespace rbc {

double RandomSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  has_spare_ = true;
  return u * m;
}

double RandomSource::exponential(double rate) {
  return -std::log(uniform_open()) / rate;
}

double RandomSource::gamma(double shape, double rate) {
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0, 1.0);
    return g * std::pow(uniform_open(), 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v / rate;
    }
  }
}

double RandomSource::inverse_gaussian(double mean, double shape) {
  const double y = chi_squared_1();
  const double w = mean * y;
  const double s = std::sqrt(4.0 * shape * w + w * w);
  // mean * (1 + (w - s)/(2 shape)) rewritten cancellation-free; stays > 0.
  const double x = mean * (s - w) / (s + w);
  if (uniform() * (mean + x) <= mean) return x;
  return mean * mean / x;
}

double RandomSource::half_cauchy() {
  return std::tan(M_PI_2 * uniform_open());
}

std::uint64_t RandomSource::mix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace rbc
