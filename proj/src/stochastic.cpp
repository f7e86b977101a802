#include "shp/stochastic.hpp"

#include <algorithm>
#include <numbers>

namespace shp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeltaClamp = 1e-10;

double log_sin(double x) { return std::log(std::sin(x)); }

// log Phi(x) for the standard normal CDF.
double log_norm_cdf(double x) {
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Mills-ratio asymptotics far in the lower tail.
  return -0.5 * x * x - std::log(-x) - 0.5 * std::log(2.0 * kPi);
}

// Truncation point of the Devroye / Polson-Scott-Windle PG(1, z) sampler.
constexpr double kPgTrunc = 0.64;

// Coefficient a_n(x) of the alternating series for J*(1, 0).
double pg_coef(int n, double x) {
  const double k = n + 0.5;
  if (x > kPgTrunc) return kPi * k * std::exp(-0.5 * k * k * kPi * kPi * x);
  return kPi * k * std::pow(2.0 / (kPi * x), 1.5) * std::exp(-2.0 * k * k / x);
}

// Inverse-Gaussian(mu, 1) restricted to (0, trunc).
double truncated_inverse_gaussian(double z, RngStream& rng) {
  const double mu = 1.0 / z;
  if (mu > kPgTrunc) {
    for (;;) {
      double e1 = rng.exponential();
      double e2 = rng.exponential();
      while (e1 * e1 > 2.0 * e2 / kPgTrunc) {
        e1 = rng.exponential();
        e2 = rng.exponential();
      }
      const double x = kPgTrunc / ((1.0 + kPgTrunc * e1) * (1.0 + kPgTrunc * e1));
      if (rng.uniform() <= std::exp(-0.5 * z * z * x)) return x;
    }
  }
  for (;;) {
    const double y = rng.normal();
    const double yy = y * y;
    double x = mu + 0.5 * mu * mu * yy - 0.5 * mu * std::sqrt(4.0 * mu * yy + mu * mu * yy * yy);
    if (rng.uniform() > mu / (mu + x)) x = mu * mu / x;
    if (x < kPgTrunc) return x;
  }
}

// Probability of drawing from the exponential (right) piece.
double pg_right_mass(double z, double k) {
  const double b = std::sqrt(1.0 / kPgTrunc) * (kPgTrunc * z - 1.0);
  const double a = -std::sqrt(1.0 / kPgTrunc) * (kPgTrunc * z + 1.0);
  const double x0 = std::log(k) + k * kPgTrunc;
  const double xb = x0 - z + log_norm_cdf(b);
  const double xa = x0 + z + log_norm_cdf(a);
  const double q_over_p = 4.0 / kPi * (std::exp(xb) + std::exp(xa));
  return 1.0 / (1.0 + q_over_p);
}

double sample_pg1(double c, RngStream& rng) {
  const double z = 0.5 * std::fabs(c);
  const double k = 0.125 * kPi * kPi + 0.5 * z * z;
  const double p_right = pg_right_mass(z, k);
  for (;;) {
    double x = 0.0;
    if (rng.uniform() < p_right) {
      x = kPgTrunc + rng.exponential() / k;
    } else {
      x = truncated_inverse_gaussian(z, rng);
    }
    double s = pg_coef(0, x);
    const double y = rng.uniform() * s;
    for (int n = 1;; ++n) {
      if (n % 2 == 1) {
        s -= pg_coef(n, x);
        if (y <= s) return 0.25 * x;
      } else {
        s += pg_coef(n, x);
        if (y > s) break;
      }
      if (n > 10000) break;
    }
  }
}

// PG(b, c) for 0 < b < 1 via the truncated gamma-series representation;
// the omitted tail is replaced by its expectation.
double sample_pg_series(double b, double c, RngStream& rng) {
  constexpr int kTerms = 200;
  const double cc = c * c / (4.0 * kPi * kPi);
  double sum = 0.0;
  for (int k = 1; k <= kTerms; ++k) {
    const double d = (k - 0.5) * (k - 0.5) + cc;
    sum += rng.gamma(b, 1.0) / d;
  }
  // Sum_{k > K} 1 / (k - 1/2)^2 ≈ 1 / K.
  sum += b / static_cast<double>(kTerms);
  return sum / (2.0 * kPi * kPi);
}

}  // namespace

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

double log_tilted_stable_f(double delta, double alpha) {
  check_alpha(alpha);
  if (!(delta > 0.0 && delta < kPi)) throw DomainError("tilted_stable_f: delta outside (0, pi)");
  const double d = std::clamp(delta, kDeltaClamp, kPi - kDeltaClamp);
  const double one_minus = 1.0 - alpha;
  return (alpha / one_minus) * log_sin(alpha * d) + log_sin(one_minus * d) -
         log_sin(d) / one_minus;
}

double tilted_stable_f(double delta, double alpha) {
  return std::exp(log_tilted_stable_f(delta, alpha));
}

double sample_delta_prior(double alpha, RngStream& rng) {
  check_alpha(alpha);
  const double power = (alpha - 1.0) / (2.0 * alpha);
  auto target = [&](double d) {
    if (!(d > 0.0 && d < kPi)) return -HUGE_VAL;
    return power * log_tilted_stable_f(d, alpha);
  };
  double delta = 0.5 * kPi;
  for (int i = 0; i < 10; ++i) delta = slice_sample(target, 0.0, kPi, delta, rng);
  return delta;
}

double sample_delta_conditional(double xi, double alpha, double delta_current, RngStream& rng) {
  check_alpha(alpha);
  if (!(xi > 0.0)) throw DomainError("sample_delta_conditional: xi must be positive");
  if (!(delta_current > 0.0 && delta_current < kPi)) {
    throw DomainError("sample_delta_conditional: delta outside (0, pi)");
  }
  auto target = [&](double d) {
    if (!(d > 0.0 && d < kPi)) return -HUGE_VAL;
    const double lf = log_tilted_stable_f(d, alpha);
    return lf - std::exp(lf) * xi;
  };
  return slice_sample(target, 0.0, kPi, delta_current, rng);
}

double tilted_stable_s2_from_xi(double xi, double alpha) {
  const double log_s2 = std::lgamma(1.0 / (2.0 * alpha)) + ((1.0 - alpha) / alpha) * std::log(xi) -
                        std::log(2.0) - std::lgamma(3.0 / (2.0 * alpha));
  return std::exp(log_s2);
}

double tilted_stable_xi_from_s2(double s2, double alpha) {
  const double log_scaled = std::log(2.0) + std::lgamma(3.0 / (2.0 * alpha)) -
                            std::lgamma(1.0 / (2.0 * alpha)) + std::log(s2);
  return std::exp((alpha / (1.0 - alpha)) * log_scaled);
}

TiltedStableDraw sample_tilted_stable_scale(double alpha, RngStream& rng) {
  check_alpha(alpha);
  const double delta = sample_delta_prior(alpha, rng);
  const double rate = tilted_stable_f(delta, alpha);
  const double xi = rng.gamma((1.0 + alpha) / (2.0 * alpha), rate);
  return {tilted_stable_s2_from_xi(xi, alpha), delta, xi};
}

double sample_polya_gamma(double b, double c, RngStream& rng) {
  if (!(b > 0.0) || !std::isfinite(b)) throw DomainError("sample_polya_gamma: b must be positive");
  if (!std::isfinite(c)) throw DomainError("sample_polya_gamma: c must be finite");
  const double whole = std::floor(b);
  const double frac = b - whole;
  double total = 0.0;
  for (int i = 0; i < static_cast<int>(whole); ++i) total += sample_pg1(c, rng);
  if (frac > 1e-12) total += sample_pg_series(frac, c, rng);
  return total;
}

}  // namespace shp
