#include "shp/prior_diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "shp/errors.hpp"

namespace shp {

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

void require_bivariate(const CovStructure& omega, const char* what) {
  if (omega.dim() != 2) throw InvalidInput(std::string(what) + ": requires p = 2");
}

double sample_sd(const VectorXd& x) {
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / static_cast<double>(x.size() - 1));
}

double gauss(double d, double h) { return kInvSqrt2Pi / h * std::exp(-0.5 * d * d / (h * h)); }

VectorXd percentiles(const VectorXd& x) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x(a) < x(b); });
  VectorXd u(n);
  for (std::size_t r = 0; r < n; ++r) u(order[r]) = (static_cast<double>(r) + 0.5) / static_cast<double>(n);
  return u;
}

double quantile_sorted(const std::vector<double>& v, double prob) {
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

double DensityGrid::cell_area() const {
  const double dx = x.size() > 1 ? x(1) - x(0) : 1.0;
  const double dy = y.size() > 1 ? y(1) - y(0) : 1.0;
  return dx * dy;
}

double DensityCurve::integral() const {
  double total = 0.0;
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    total += 0.5 * (density(i) + density(i - 1)) * (x(i) - x(i - 1));
  }
  return total;
}

double DensityCurve::mean() const {
  double total = 0.0;
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    total += 0.5 * (x(i) * density(i) + x(i - 1) * density(i - 1)) * (x(i) - x(i - 1));
  }
  return total / integral();
}

double silverman_bandwidth(const VectorXd& x) {
  if (x.size() < 2) throw InsufficientSample("silverman_bandwidth: need at least two points");
  return 1.06 * sample_sd(x) * std::pow(static_cast<double>(x.size()), -0.2);
}

DensityGrid kde2d(const MatrixXd& points, double lo, double hi, std::size_t grid, bool reflect) {
  if (points.cols() != 2 || points.rows() < 2) throw InvalidInput("kde2d: need n x 2 points");
  if (grid < 2) throw InvalidInput("kde2d: grid must be at least 2");
  const auto n = static_cast<double>(points.rows());
  // Bivariate normal-reference rule: h_j = sd_j n^{-1/6}.
  const double hx = sample_sd(points.col(0)) * std::pow(n, -1.0 / 6.0);
  const double hy = sample_sd(points.col(1)) * std::pow(n, -1.0 / 6.0);

  DensityGrid out;
  out.bandwidth_x = hx;
  out.bandwidth_y = hy;
  const double cell = (hi - lo) / static_cast<double>(grid);
  out.x.resize(static_cast<Eigen::Index>(grid));
  for (std::size_t i = 0; i < grid; ++i) out.x(i) = lo + (static_cast<double>(i) + 0.5) * cell;
  out.y = out.x;

  // Fine histogram over the range padded by five bandwidths.
  const double pad = reflect ? 0.0 : 5.0 * std::max(hx, hy);
  const double blo = lo - pad;
  const double bhi = hi + pad;
  const std::size_t nb = std::max<std::size_t>(512, 8 * grid);
  const double bw = (bhi - blo) / static_cast<double>(nb);
  MatrixXd counts = MatrixXd::Zero(nb, nb);
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    const double a = (points(r, 0) - blo) / bw;
    const double b = (points(r, 1) - blo) / bw;
    if (a < 0.0 || b < 0.0 || a >= static_cast<double>(nb) || b >= static_cast<double>(nb)) continue;
    counts(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += 1.0;
  }

  auto weights = [&](double h) {
    MatrixXd w(grid, nb);
    for (std::size_t o = 0; o < grid; ++o) {
      for (std::size_t b = 0; b < nb; ++b) {
        const double c = blo + (static_cast<double>(b) + 0.5) * bw;
        double k = gauss(out.x(o) - c, h);
        if (reflect) k += gauss(out.x(o) - (2.0 * lo - c), h) + gauss(out.x(o) - (2.0 * hi - c), h);
        w(o, b) = k;
      }
    }
    return w;
  };
  const MatrixXd wx = weights(hx);
  const MatrixXd wy = weights(hy);
  out.density = wx * counts * wy.transpose() / n;
  out.std_error = (out.density.array().max(0.0) / (4.0 * std::numbers::pi * n * hx * hy)).sqrt();
  return out;
}

MatrixXd log_density(const DensityGrid& g) {
  return g.density.array().max(1e-300).log().matrix();
}

DensityGrid copula_grid(const PriorSpec& prior, const CovStructure& omega, std::size_t n_draws,
                        std::size_t grid, RngStream& rng) {
  require_bivariate(omega, "copula_grid");
  const MatrixXd beta = simulate_prior(prior, omega, n_draws, rng);
  MatrixXd u(beta.rows(), 2);
  u.col(0) = percentiles(beta.col(0));
  u.col(1) = percentiles(beta.col(1));
  return kde2d(u, 0.0, 1.0, grid, /*reflect=*/true);
}

DensityGrid prior_contour_grid(const PriorSpec& prior, const CovStructure& omega, std::size_t grid,
                               std::size_t n_draws, RngStream& rng) {
  require_bivariate(omega, "prior_contour_grid");
  const MatrixXd beta = simulate_prior(prior, omega, n_draws, rng);
  return kde2d(beta, -3.0, 3.0, grid, /*reflect=*/false);
}

DensityCurve conditional_prior_curve(const PriorSpec& prior, const CovStructure& omega,
                                     double beta2_value, std::size_t n_draws, std::size_t grid,
                                     RngStream& rng) {
  require_bivariate(omega, "conditional_prior_curve");
  if (grid < 2) throw InvalidInput("conditional_prior_curve: grid must be at least 2");
  const MatrixXd beta = simulate_prior(prior, omega, n_draws, rng);
  const double half = 0.5 * kConditionalWindow * sample_sd(beta.col(1));
  std::vector<double> kept;
  for (Eigen::Index i = 0; i < beta.rows(); ++i) {
    if (std::fabs(beta(i, 1) - beta2_value) <= half) kept.push_back(beta(i, 0));
  }
  if (kept.size() < 1000) {
    throw InsufficientSample("conditional_prior_curve: only " + std::to_string(kept.size()) +
                             " draws fall in the conditioning window (need 1000)");
  }
  const VectorXd x = Eigen::Map<const VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
  const double h = silverman_bandwidth(x);
  std::sort(kept.begin(), kept.end());
  const double lo = quantile_sorted(kept, 0.0005) - 4.0 * h;
  const double hi = quantile_sorted(kept, 0.9995) + 4.0 * h;

  DensityCurve out;
  out.bandwidth = h;
  out.retained = kept.size();
  out.x = VectorXd::LinSpaced(static_cast<Eigen::Index>(grid), lo, hi);
  out.density = VectorXd::Zero(out.x.size());
  const double norm = 1.0 / static_cast<double>(kept.size());
  for (Eigen::Index g = 0; g < out.x.size(); ++g) {
    double acc = 0.0;
    for (double v : kept) acc += gauss(out.x(g) - v, h);
    out.density(g) = acc * norm;
  }
  return out;
}

}  // namespace shp
