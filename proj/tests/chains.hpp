// Reference chains shared by the sampler unit tests and the acceptance binary.
#ifndef SHP_TESTS_CHAINS_HPP
#define SHP_TESTS_CHAINS_HPP

#include <array>
#include <cmath>

#include "shp/prior.hpp"
#include "shp/sampler.hpp"
#include "shp/stochastic.hpp"
#include "support.hpp"

namespace shp::test {

/// z-scores of (mean s_j, mean s_j^2, mean beta_j^2), each averaged over j,
/// from a successive-conditional chain alternating beta | s from the prior
/// and the elliptical-slice update of s | beta. Exact targets: E[s] from
/// expected_s (0 for normal scales), E[s^2] = 1, E[beta^2] = diag(Omega).
struct GewekeResult {
  std::array<double, 3> z{};
  std::array<double, 3> chain_mean{};
  std::array<double, 3> exact{};
};

inline GewekeResult geweke_successive(const PriorSpec& prior, const CovStructure& omega, std::size_t sweeps,
                                      std::uint64_t seed) {
  const auto p = static_cast<Eigen::Index>(omega.dim());
  const MatrixXd l = omega.sqrt_factor();
  const MatrixXd omega_inv = omega.inverse();
  RngStream rng(seed);

  GibbsState state = GibbsState::initial(static_cast<std::size_t>(p), static_cast<std::size_t>(p), prior);
  ScaleTarget target(omega_inv, prior, state.delta);
  Partition groups;
  for (Eigen::Index j = 0; j < p; ++j) groups.push_back({static_cast<std::size_t>(j)});

  const auto n = static_cast<Eigen::Index>(sweeps);
  MatrixXd stats(n, 3);
  VectorXd e(p);
  for (Eigen::Index it = 0; it < n; ++it) {
    for (Eigen::Index j = 0; j < p; ++j) e(j) = rng.normal();
    state.z = l * e;
    state.beta = state.s.cwiseProduct(state.z);

    VectorXd start = VectorXd::Ones(p);
    if (prior.is_normal_scale() && rng.uniform() < 0.5) start = -start;
    ModeResult mode = tune_m_coordinate_descent(target, state.beta, 3, 1e-3, start);
    ScaleResult scale = tune_v(target, mode.m, state.beta);
    ess_update_s(state, target, EssTuning{mode.m, scale.v, 1.0, groups}, rng);
    if (prior.family() == Family::SPB) {
      for (Eigen::Index j = 0; j < p; ++j) {
        state.xi(j) = tilted_stable_xi_from_s2(state.s(j) * state.s(j), prior.alpha());
        state.delta(j) = sample_delta_conditional(state.xi(j), prior.alpha(), state.delta(j), rng);
      }
      target.set_delta(state.delta);
    }
    stats(it, 0) = state.s.mean();
    stats(it, 1) = state.s.squaredNorm() / static_cast<double>(p);
    stats(it, 2) = state.beta.squaredNorm() / static_cast<double>(p);
  }

  GewekeResult r;
  const MatrixXd om = omega.materialize();
  r.exact = {prior.is_normal_scale() ? 0.0 : expected_s(prior), 1.0, om.diagonal().mean()};
  for (int k = 0; k < 3; ++k) {
    const VectorXd col = stats.col(k);
    r.chain_mean[k] = col.mean();
    r.z[k] = (col.mean() - r.exact[k]) / batch_means_se(col, 100);
  }
  return r;
}

/// Inverse-Gaussian(mu, shape) by transformation with one root.
inline double inverse_gaussian(double mu, double shape, RngStream& rng) {
  const double nu = rng.normal();
  const double y = nu * nu;
  const double x = mu + mu * mu * y / (2 * shape) - mu / (2 * shape) * std::sqrt(4 * mu * shape * y + mu * mu * y * y);
  return rng.uniform() <= mu / (mu + x) ? x : mu * mu / x;
}

/// Bayesian lasso with unit-variance Laplace prior (rate sqrt 2) under an
/// orthonormal design: posterior mean and batch-means standard error of
/// each beta_j given the OLS estimates.
inline std::pair<VectorXd, VectorXd> bayesian_lasso_reference(const VectorXd& ols, double phi2, std::size_t sweeps,
                                                              std::uint64_t seed) {
  const double lambda = std::sqrt(2.0);
  RngStream rng(seed);
  const Eigen::Index p = ols.size();
  VectorXd w = VectorXd::Ones(p);
  MatrixXd draws(static_cast<Eigen::Index>(sweeps), p);
  for (Eigen::Index it = 0; it < draws.rows(); ++it) {
    for (Eigen::Index j = 0; j < p; ++j) {
      const double prec = 1.0 / phi2 + w(j);
      const double b = ols(j) / phi2 / prec + rng.normal() / std::sqrt(prec);
      draws(it, j) = b;
      w(j) = inverse_gaussian(lambda / std::abs(b), lambda * lambda, rng);
    }
  }
  VectorXd mean = draws.colwise().mean();
  VectorXd se(p);
  for (Eigen::Index j = 0; j < p; ++j) se(j) = batch_means_se(draws.col(j), 100);
  return {mean, se};
}

}  // namespace shp::test

#endif  // SHP_TESTS_CHAINS_HPP
