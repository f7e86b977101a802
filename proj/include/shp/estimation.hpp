#ifndef SHP_ESTIMATION_HPP
#define SHP_ESTIMATION_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shp/covariance.hpp"
#include "shp/likelihood.hpp"
#include "shp/prior.hpp"
#include "shp/sampler.hpp"

namespace shp {

/// Coefficients with |beta_j| below this are reported as zero.
inline constexpr double kSparsityThreshold = 1e-3;

struct EmConfig {
  std::size_t draws_per_step = 1000;  ///< M, E-step draws (first 10% discarded)
  std::size_t max_iter = 200;
  double tol = 1e-8;  ///< on ||beta^(i+1) - beta^(i)||^2; infinity stops after one step
  std::uint64_t seed = 1;
  double nu = 1.0;
  AngleMode angle_mode = AngleMode::Auto;
  std::size_t cd_max_iter = 3;
  double cd_tol = 1e-3;
  std::optional<VectorXd> beta_start;  ///< ridge solution with s = 1 by default

  void validate() const;
};

struct EmResult {
  VectorXd beta;
  double gamma = 0.0;  ///< intercept, when present
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<bool> sparsity;  ///< |beta_j| < kSparsityThreshold
  std::map<std::string, std::size_t> warnings;
};

/// Gibbs-within-EM posterior mode: the E-step averages (1/s)(1/s)' over
/// elliptical-slice draws of s given beta, the M-step minimizes
///   h(y | X, beta) + 1/2 beta'(Omega^-1 ∘ E)beta.
/// The trace holds that penalized objective at each new iterate.
EmResult em_posterior_mode(const Likelihood& likelihood, const PriorSpec& prior, const CovStructure& omega,
                           const EmConfig& config);

/// One M-step: minimizer of h(y | X, b) + 1/2 beta' P beta (intercept
/// unpenalized). Closed form for Gaussian, Newton for logistic.
VectorXd penalized_mode(const Likelihood& likelihood, const MatrixXd& penalty, const VectorXd& start);

/// 2 x 2 Omega giving the prior marginal correlation rho under `prior`
/// (unit marginal variances).
MatrixXd omega_for_marginal_correlation(const PriorSpec& prior, double rho);

struct ThresholdPoint {
  double ols1 = 0.0;
  double ols2 = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
};

/// Posterior modes under the orthonormal-design Gaussian likelihood centred
/// at each (ols1, ols2) pair; rows ordered by ols2 then ols1. Grid point k
/// uses seed substream k of config.seed.
std::vector<ThresholdPoint> bivariate_threshold_surface(const PriorSpec& prior, const CovStructure& omega,
                                                        double phi2, const std::vector<double>& ols2_values,
                                                        const std::vector<double>& ols1_grid,
                                                        const EmConfig& config);

/// Posterior mode under a one-coefficient orthonormal design.
double univariate_threshold(const PriorSpec& prior, double phi2, double ols, const EmConfig& config);

enum class OmegaParametrization { Ar1, KroneckerFactors };

struct MmleConfig {
  OmegaParametrization parametrization = OmegaParametrization::Ar1;
  std::size_t p1 = 0;  ///< rows of the coefficient matrix (AR(1) factor); Kronecker only
  std::size_t p2 = 0;  ///< columns (dense factor); Kronecker only
  std::size_t draws_per_step = 1000;
  std::size_t max_iter = 50;
  double tol = 1e-4;  ///< on the change in rho and ||Omega2||_F
  double rho_start = 0.0;
  std::uint64_t seed = 1;
  double nu = 1.0;
  AngleMode angle_mode = AngleMode::Auto;
};

struct MmleResult {
  double rho = 0.0;
  std::optional<MatrixXd> omega2;
  std::vector<double> objective_trace;
  std::vector<double> objective_se;  ///< MC standard error of each E-step objective
  std::vector<double> rho_trace;
  std::size_t iterations = 0;
  bool converged = false;

  CovStructure omega(std::size_t p) const;
};

/// 1/2 [log|Omega| + tr(Omega^-1 E)] for AR(1) Omega.
double ar1_mstep_objective(double rho, const MatrixXd& e_zz);
/// Golden-section minimizer of ar1_mstep_objective on (-1, 1).
double ar1_mstep(const MatrixXd& e_zz);

struct KroneckerMstep {
  double rho = 0.0;
  MatrixXd omega2;
  double objective = 0.0;
};

/// Flip-flop minimization of 1/2 [log|Omega2 ⊗ Omega1| + tr((Omega2 ⊗ Omega1)^-1 E)]
/// with Omega1 = AR1(rho) of size p1 and Omega2 dense p2 x p2.
KroneckerMstep kronecker_mstep(const MatrixXd& e_zz, std::size_t p1, std::size_t p2, double rho_start,
                               std::size_t max_sweeps = 100, double tol = 1e-10);

/// Gibbs-within-EM estimate of a structured Omega.
MmleResult mmle_omega(const Likelihood& likelihood, const PriorSpec& prior, const MmleConfig& config);

}  // namespace shp

#endif  // SHP_ESTIMATION_HPP
