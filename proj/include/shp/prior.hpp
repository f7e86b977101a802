#ifndef SHP_PRIOR_HPP
#define SHP_PRIOR_HPP

#include <optional>
#include <string>

#include "shp/covariance.hpp"
#include "shp/rng.hpp"

namespace shp {

/// SHP families: beta = s ∘ z with z ~ N(0, Omega) and stochastic scales s.
enum class Family {
  SPN,   ///< s ~ N(0, Psi)
  sSPN,  ///< SPN with |Omega| and |Psi| tied to a common Sigma
  SNG,   ///< s_j^2 ~ gamma(c, c)
  SPB,   ///< s_j^2 polynomially tilted positive (q/2)-stable
};

std::string to_string(Family f);
Family family_from_string(const std::string& name);

class PriorSpec {
 public:
  static PriorSpec spn(CovStructure psi);
  static PriorSpec sspn(CovStructure psi);
  static PriorSpec sng(double c);
  static PriorSpec spb(double q);

  Family family() const noexcept { return family_; }
  bool is_normal_scale() const noexcept {
    return family_ == Family::SPN || family_ == Family::sSPN;
  }
  double c() const;
  double q() const;
  /// Index of stability q / 2 (SPB only).
  double alpha() const { return 0.5 * q(); }
  const CovStructure& psi() const;
  /// Replace Psi (fully-Bayes updates); unit diagonal not re-checked.
  void set_psi(CovStructure psi);

 private:
  PriorSpec(Family f, double shape, std::optional<CovStructure> psi)
      : family_(f), shape_(shape), psi_(std::move(psi)) {}
  Family family_;
  double shape_ = 0.0;
  std::optional<CovStructure> psi_;
};

double expected_s(const PriorSpec& prior);
double kurtosis(const PriorSpec& prior);
double max_correlation(const PriorSpec& prior);

/// Sigma = E[s s'] ∘ Omega.
MatrixXd marginal_covariance(const PriorSpec& prior, const CovStructure& omega);

/// E[b_j^2 b_k^2] / (sigma_jj sigma_kk) under the SPN prior, given the
/// correlations of Omega and Psi for the pair.
double fourth_cross_moment(const PriorSpec& prior, double c_omega_jk, double c_psi_jk);

/// Draws of the scales s (n_draws x p).
MatrixXd simulate_scales(const PriorSpec& prior, std::size_t p, std::size_t n_draws, RngStream& rng);

/// Draws of beta = s ∘ z (n_draws x p).
MatrixXd simulate_prior(const PriorSpec& prior, const CovStructure& omega, std::size_t n_draws,
                        RngStream& rng);

struct MomEstimate {
  MatrixXd omega;
  std::optional<MatrixXd> psi;   ///< sSPN only
  double projection_residual = 0.0;
  bool projection_active = false;
};

/// Method-of-moments map from an estimate of Sigma to Omega (and Psi for
/// sSPN), projected onto the PSD cone.
MomEstimate mom_hyperparameters(const MatrixXd& sigma_hat, const PriorSpec& prior);

}  // namespace shp

#endif  // SHP_PRIOR_HPP
