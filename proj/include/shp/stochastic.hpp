#ifndef SHP_STOCHASTIC_HPP
#define SHP_STOCHASTIC_HPP

#include <cmath>
#include <string>

#include "shp/errors.hpp"
#include "shp/rng.hpp"

namespace shp {

/// Maximum number of interval shrinks per slice-sampling transition.
inline constexpr int kSliceIterationCap = 1000;

/// One transition of the shrinking-interval slice sampler on [a, b]
/// targeting exp(log_density). The interval starts as the full support
/// and shrinks toward `x` on every rejected point.
template <class LogDensity>
double slice_sample(LogDensity&& log_density, double a, double b, double x, RngStream& rng) {
  if (!(a < b)) throw InvalidInput("slice_sample: require a < b");
  if (!(x >= a && x <= b)) throw InvalidInput("slice_sample: current point outside [a, b]");
  const double current = log_density(x);
  if (!std::isfinite(current)) {
    throw InvalidInput("slice_sample: log density not finite at current point");
  }
  const double level = current - rng.exponential();
  for (int it = 0; it < kSliceIterationCap; ++it) {
    const double d = rng.uniform(a, b);
    if (log_density(d) >= level) return d;
    if (d < x) {
      a = d;
    } else {
      b = d;
    }
  }
  throw SamplerError("slice_sample", "iteration cap of " + std::to_string(kSliceIterationCap) +
                                         " exceeded");
}

/// Parameters of one polynomially tilted positive alpha-stable scale.
struct TiltedStableParams {
  double alpha;
  double delta;
  double xi;
};

/// log f(delta | alpha) for Zolotarev's function
///   f = sin(a d)^{a/(1-a)} sin((1-a) d) / sin(d)^{1/(1-a)}.
double log_tilted_stable_f(double delta, double alpha);
double tilted_stable_f(double delta, double alpha);

/// Draw delta from p(delta | alpha) ∝ f^{(alpha-1)/(2 alpha)} on (0, pi):
/// ten slice transitions started from pi/2.
double sample_delta_prior(double alpha, RngStream& rng);

/// One slice transition for delta | xi, target ∝ f exp(-f xi).
double sample_delta_conditional(double xi, double alpha, double delta_current, RngStream& rng);

/// s^2 from xi under unit-second-moment normalization, and its inverse.
double tilted_stable_s2_from_xi(double xi, double alpha);
double tilted_stable_xi_from_s2(double s2, double alpha);

struct TiltedStableDraw {
  double s2;
  double delta;
  double xi;
};

/// Squared scale s^2 whose normal scale mixture has exponential-power
/// margins with exponent q = 2 alpha; E[s^2] = 1.
TiltedStableDraw sample_tilted_stable_scale(double alpha, RngStream& rng);

/// Polya-Gamma PG(b, c). Exact alternating-series sampler for b = 1;
/// integer b by summation.
double sample_polya_gamma(double b, double c, RngStream& rng);

void check_alpha(double alpha);

}  // namespace shp

#endif  // SHP_STOCHASTIC_HPP
