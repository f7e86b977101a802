#ifndef SHP_SAMPLER_HPP
#define SHP_SAMPLER_HPP

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "shp/covariance.hpp"
#include "shp/diagnostics.hpp"
#include "shp/likelihood.hpp"
#include "shp/prior.hpp"
#include "shp/rng.hpp"

namespace shp {

/// Disjoint, exhaustive groups of coefficient indices.
using Partition = std::vector<std::vector<std::size_t>>;

bool is_partition(const Partition& groups, std::size_t p);

/// Proposal parameters for the elliptical-slice update of s.
struct EssTuning {
  VectorXd m;         ///< location
  VectorXd v;         ///< scale, strictly positive
  double nu = 1.0;    ///< t degrees of freedom
  Partition angle_groups;

  void validate() const;
};

struct GibbsState {
  VectorXd beta;
  VectorXd s;
  VectorXd z;
  VectorXd angles;  ///< one per angle group, in (-pi, pi]
  VectorXd w;
  VectorXd u;
  VectorXd r;
  VectorXd delta;     ///< SPB only
  VectorXd xi;        ///< SPB only
  VectorXd pg_omega;  ///< logistic only
  double gamma_intercept = 0.0;
  double rho_omega = 0.0;
  double rho_psi = 0.0;
  MatrixXd omega2;
  MatrixXd psi2;

  /// s = 1, z = beta = 0, angles = 0, delta = pi/2.
  static GibbsState initial(std::size_t p, std::size_t groups, const PriorSpec& prior);
};

/// Coefficients of the one-dimensional objective in s_j,
///   k1 s^-2 + k2 s^-1 + k3 log(s^2) + k4 s + k5 |s|^k6,
/// which equals log p(s | beta, Omega, theta) up to terms free of s_j.
struct CoordinateKappa {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double k4 = 0.0;
  double k5 = 0.0;
  double k6 = 2.0;

  double objective(double s) const;
  /// s^3 times the derivative: -2k1 - k2 s + 2k3 s^2 + k4 s^3 + k5 k6 s^(k6+2).
  double stationarity(double s) const;
  double second_derivative(double s) const;
};

/// Full conditional of s given beta, Omega and the prior (and delta for
/// SPB). For SNG/SPB the density is evaluated at |s|.
class ScaleTarget {
 public:
  ScaleTarget(MatrixXd omega_inv, PriorSpec prior, VectorXd delta = {});

  double log_density(const VectorXd& s, const VectorXd& beta) const;
  CoordinateKappa kappa(std::size_t j, const VectorXd& s, const VectorXd& beta) const;

  bool signed_scales() const noexcept { return prior_.is_normal_scale(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(omega_inv_.rows()); }
  const PriorSpec& prior() const noexcept { return prior_; }
  const MatrixXd& omega_inv() const noexcept { return omega_inv_; }
  const VectorXd& delta() const noexcept { return delta_; }

  void set_omega_inv(MatrixXd omega_inv);
  void set_psi_inv(MatrixXd psi_inv);
  void set_delta(VectorXd delta);

 private:
  MatrixXd omega_inv_;
  PriorSpec prior_;
  MatrixXd psi_inv_;
  VectorXd delta_;
  VectorXd f_delta_;
  double spb_scale_ = 0.0;  ///< (2 Gamma(3/2a) / Gamma(1/2a))^(a/(1-a))
  double spb_power_ = 0.0;  ///< a / (1 - a)
};

/// log of prod|s_j|^-1 exp{-1/2 (1/s)'(Omega^-1 ∘ beta beta')(1/s)} p(s | theta)
/// up to a constant. Returns -infinity when some s_j = 0.
double s_log_conditional(const VectorXd& s, const VectorXd& beta, const MatrixXd& omega_inv,
                         const PriorSpec& prior, const VectorXd* delta = nullptr);

/// Target of the angle slice step: log p(s~) minus the log t-proposal
/// densities at the rotated point s~ (before any absolute value).
double ess_angle_log_target(const ScaleTarget& target, const VectorXd& s_tilde,
                            const VectorXd& beta, const EssTuning& tuning);

struct EssDiagnostics {
  std::size_t slice_evaluations = 0;
};

/// One elliptical-slice update of state.s given state.beta. Updates
/// s, w, u, r and angles.
EssDiagnostics ess_update_s(GibbsState& state, const ScaleTarget& target, const EssTuning& tuning,
                            RngStream& rng);

struct ModeResult {
  VectorXd m;
  std::size_t fallbacks = 0;
  std::size_t sweeps = 0;
};

/// Coordinate-wise maximizer of the s conditional. `start` supplies the
/// other coordinates on the first pass (ones if empty).
ModeResult tune_m_coordinate_descent(const ScaleTarget& target, const VectorXd& beta,
                                     std::size_t max_iter, double tol, VectorXd start = {});

/// Best maximizer of one coordinate objective; nullopt if no admissible
/// stationary point exists.
std::optional<double> maximize_coordinate(const CoordinateKappa& kappa, bool allow_negative);

struct ScaleResult {
  VectorXd v;
  std::size_t clamped = 0;
};

/// v_j = (-d^2/ds_j^2 log p at m~)^(-1/2), clamped to [1e-6, 1e6]; 1.0 where
/// the curvature is not negative.
ScaleResult tune_v(const ScaleTarget& target, const VectorXd& m, const VectorXd& beta);

/// Angle groups from the eigenstructure of X'X.
Partition partition_design(const MatrixXd& x, RngStream& rng);

/// Draw (z, gamma) | s from the conditionally quadratic likelihood and set
/// beta = s ∘ z. Returns 1 if jitter was needed.
std::size_t update_coefficients(GibbsState& state, const QuadraticForm& q, const MatrixXd& omega_inv,
                                bool intercept, RngStream& rng);

/// Two-block normal Gibbs sweep for SPN: (z, gamma) | s then s | z.
std::size_t spn_block_gibbs(GibbsState& state, const QuadraticForm& q, const MatrixXd& omega_inv,
                            const MatrixXd& psi_inv, bool intercept, RngStream& rng);

/// Draw PG(1, x_i'beta + gamma) latents and return the implied quadratic form.
QuadraticForm update_logistic_latents(GibbsState& state, const Likelihood& likelihood, RngStream& rng);

enum class RhoPrior { Uniform, Beta22 };

/// log full conditional of an AR(1) parameter for the matrix-normal term
/// tr(Omega1^-1 M Omega2^-1 M'), up to a constant.
double rho_log_target(double rho, const MatrixXd& m, const MatrixXd& factor2_inv, RhoPrior prior);

double update_rho(const MatrixXd& m, const MatrixXd& factor2_inv, double rho_current, RhoPrior prior,
                  RngStream& rng);

/// Wishart(df, scale) by the Bartlett decomposition; mean df * scale.
MatrixXd sample_wishart(double df, const MatrixXd& scale, RngStream& rng);
/// Inverse-Wishart(df, scale); mean scale / (df - d - 1).
MatrixXd sample_inverse_wishart(double df, const MatrixXd& scale, RngStream& rng);

/// Conjugate inverse-Wishart draw of the column factor Omega2 given the
/// matrix-normal residual M (p1 x p2) and Omega1^-1.
MatrixXd update_factor_covariance(const MatrixXd& m, const MatrixXd& factor1_inv, double wishart_df,
                                  const MatrixXd& wishart_scale, RngStream& rng);

enum class AngleMode { Auto, Single, All };
enum class HyperMode { Fixed, FullyBayes };
enum class SpnSampler { Block, Ess };

struct ChainConfig {
  std::size_t iterations = 1000;  ///< total sweeps, burn-in included
  std::size_t burnin = 0;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  double nu = 1.0;
  AngleMode angle_mode = AngleMode::Auto;
  std::optional<Partition> angle_groups;  ///< overrides angle_mode
  HyperMode hyper_mode = HyperMode::Fixed;
  RhoPrior rho_prior = RhoPrior::Beta22;
  SpnSampler spn_sampler = SpnSampler::Block;
  std::size_t cd_max_iter = 3;
  double cd_tol = 1e-3;
  double wishart_df = 10.0;
  std::optional<MatrixXd> wishart_scale;  ///< identity by default
  std::function<void(std::size_t, std::size_t)> progress;
};

/// Kept-draw count for a configuration.
std::size_t kept_draws(const ChainConfig& config);

/// Full Gibbs sampler. Columns: beta_j, s_j, then gamma (intercept),
/// rho_omega and rho_psi when those are sampled.
ChainOutput run_chain(const Likelihood& likelihood, const PriorSpec& prior, const CovStructure& omega,
                      const ChainConfig& config);

}  // namespace shp

#endif  // SHP_SAMPLER_HPP
