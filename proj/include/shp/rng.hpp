#ifndef SHP_RNG_HPP
#define SHP_RNG_HPP

#include <cstdint>
#include <random>

namespace shp {

/// Seeded pseudo-random stream. Identical seeds give identical sequences;
/// `substream(i)` derives an independent stream for index i without
/// touching the parent's state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  RngStream substream(std::uint64_t index) const;

  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal();
  /// Exponential with unit rate.
  double exponential();
  /// Gamma with the given shape and rate (mean shape / rate).
  double gamma(double shape, double rate);
  /// Index in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// SplitMix64 finalizer, used for seed derivation.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

}  // namespace shp

#endif  // SHP_RNG_HPP
