// Shared oracles for the test binaries.
#ifndef SHP_TESTS_SUPPORT_HPP
#define SHP_TESTS_SUPPORT_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace shp::test {

using Eigen::VectorXd;

/// Kolmogorov limit quantile: P(sup > k / sqrt(n)) = 0.001.
inline constexpr double kKs001 = 1.9495;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Laplace with unit variance (scale 1/sqrt 2).
inline double laplace_cdf(double x) {
  const double b = 1.0 / std::numbers::sqrt2;
  return x < 0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b);
}

inline double ks_statistic(VectorXd x, const std::function<double(double)>& cdf) {
  std::sort(x.data(), x.data() + x.size());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double f = cdf(x(i));
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

inline double ks_two_sample(VectorXd a, VectorXd b) {
  std::sort(a.data(), a.data() + a.size());
  std::sort(b.data(), b.data() + b.size());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  Eigen::Index i = 0;
  Eigen::Index j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a(i), b(j));
    while (i < a.size() && a(i) <= v) ++i;
    while (j < b.size() && b(j) <= v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

inline double ks_two_sample_critical(std::size_t n, std::size_t m) {
  const double nd = static_cast<double>(n);
  const double md = static_cast<double>(m);
  return kKs001 * std::sqrt((nd + md) / (nd * md));
}

inline double mean(const VectorXd& x) { return x.mean(); }

inline double variance(const VectorXd& x) {
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

inline double sample_kurtosis(const VectorXd& x) {
  const double m2 = x.array().square().mean();
  const double m4 = x.array().square().square().mean();
  return m4 / (m2 * m2);
}

/// Standard error of the mean by non-overlapping batch means.
inline double batch_means_se(const VectorXd& x, Eigen::Index batches = 50) {
  const Eigen::Index len = x.size() / batches;
  VectorXd means(batches);
  for (Eigen::Index b = 0; b < batches; ++b) means(b) = x.segment(b * len, len).mean();
  return std::sqrt(variance(means) / static_cast<double>(batches));
}

}  // namespace shp::test

#endif  // SHP_TESTS_SUPPORT_HPP
