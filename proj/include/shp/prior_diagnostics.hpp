#ifndef SHP_PRIOR_DIAGNOSTICS_HPP
#define SHP_PRIOR_DIAGNOSTICS_HPP

#include "shp/prior.hpp"

namespace shp {

/// Kernel density estimate on a regular grid of cell centers.
/// density(i, j) is evaluated at (x(i), y(j)).
struct DensityGrid {
  VectorXd x;
  VectorXd y;
  MatrixXd density;
  MatrixXd std_error;  ///< asymptotic Monte Carlo standard error of density
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;
  double cell_area() const;
};

struct DensityCurve {
  VectorXd x;
  VectorXd density;
  double bandwidth = 0.0;
  std::size_t retained = 0;
  /// Trapezoid integral of x * density.
  double mean() const;
  double integral() const;
};

inline constexpr std::size_t kDefaultCopulaGrid = 64;
/// Conditioning window for conditional curves, as a fraction of sd(beta_2).
inline constexpr double kConditionalWindow = 0.05;

/// Bivariate KDE of the percentile-transformed draws (u1, u2) on the unit
/// square, with reflection at the edges. Requires p = 2.
DensityGrid copula_grid(const PriorSpec& prior, const CovStructure& omega, std::size_t n_draws,
                        std::size_t grid, RngStream& rng);

/// KDE of beta_1 among draws whose beta_2 lies within a window of total
/// width 0.05 sd(beta_2) centred at beta2_value.
DensityCurve conditional_prior_curve(const PriorSpec& prior, const CovStructure& omega,
                                     double beta2_value, std::size_t n_draws, std::size_t grid,
                                     RngStream& rng);

/// Bivariate KDE of prior draws on [-3, 3]^2. density holds the density;
/// use log_density() for contour levels.
DensityGrid prior_contour_grid(const PriorSpec& prior, const CovStructure& omega, std::size_t grid,
                               std::size_t n_draws, RngStream& rng);

MatrixXd log_density(const DensityGrid& g);

/// Gridded KDE from raw 2-D points (exposed for testing).
DensityGrid kde2d(const MatrixXd& points, double lo, double hi, std::size_t grid, bool reflect);

/// Silverman-rule bandwidth for a 1-D sample.
double silverman_bandwidth(const VectorXd& x);

}  // namespace shp

#endif  // SHP_PRIOR_DIAGNOSTICS_HPP
