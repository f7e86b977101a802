#include "shp/rng.hpp"

#include <cmath>

#include "shp/errors.hpp"

namespace shp {

std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(mix_seed(seed)) {}

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(mix_seed(seed_ ^ mix_seed(index + 0x5851F42D4C957F2DULL)));
}

double RngStream::uniform() {
  // 53 random bits mapped to the open interval.
  for (;;) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::exponential() { return -std::log(uniform()); }

double RngStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate)) {
    throw DomainError("gamma: shape and rate must be positive and finite");
  }
  // Marsaglia-Tsang; shape < 1 boosted by U^(1/shape).
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0, 1.0);
    return g * std::pow(uniform(), 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw InvalidInput("below: n must be positive");
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

}  // namespace shp
