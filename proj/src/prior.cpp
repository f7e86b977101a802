#include "shp/prior.hpp"

#include <cmath>
#include <numbers>

#include "shp/errors.hpp"
#include "shp/stochastic.hpp"

namespace shp {

std::string to_string(Family f) {
  switch (f) {
    case Family::SPN: return "spn";
    case Family::sSPN: return "sspn";
    case Family::SNG: return "sng";
    case Family::SPB: return "spb";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  if (name == "spn") return Family::SPN;
  if (name == "sspn") return Family::sSPN;
  if (name == "sng") return Family::SNG;
  if (name == "spb") return Family::SPB;
  throw InvalidInput("unknown prior family '" + name + "' (expected spn, sspn, sng or spb)");
}

namespace {

void check_unit_diagonal(const CovStructure& psi) {
  const MatrixXd m = psi.materialize();
  if ((m.diagonal().array() - 1.0).abs().maxCoeff() > 1e-10) {
    throw InvalidInput("Psi must have unit diagonal");
  }
}

}  // namespace

PriorSpec PriorSpec::spn(CovStructure psi) {
  check_unit_diagonal(psi);
  return PriorSpec(Family::SPN, 0.0, std::move(psi));
}

PriorSpec PriorSpec::sspn(CovStructure psi) {
  check_unit_diagonal(psi);
  return PriorSpec(Family::sSPN, 0.0, std::move(psi));
}

PriorSpec PriorSpec::sng(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("SNG shape c must be positive");
  return PriorSpec(Family::SNG, c, std::nullopt);
}

PriorSpec PriorSpec::spb(double q) {
  if (!(q > 0.0 && q < 2.0)) throw DomainError("SPB exponent q must lie in (0, 2)");
  return PriorSpec(Family::SPB, q, std::nullopt);
}

double PriorSpec::c() const {
  if (family_ != Family::SNG) throw UnsupportedFamily("c is defined for SNG only");
  return shape_;
}

double PriorSpec::q() const {
  if (family_ != Family::SPB) throw UnsupportedFamily("q is defined for SPB only");
  return shape_;
}

const CovStructure& PriorSpec::psi() const {
  if (!psi_) throw UnsupportedFamily("Psi is defined for SPN/sSPN only");
  return *psi_;
}

void PriorSpec::set_psi(CovStructure psi) {
  if (!is_normal_scale()) throw UnsupportedFamily("Psi is defined for SPN/sSPN only");
  psi_ = std::move(psi);
}

double expected_s(const PriorSpec& prior) {
  switch (prior.family()) {
    case Family::SNG: {
      const double c = prior.c();
      return std::exp(std::lgamma(c + 0.5) - std::lgamma(c) - 0.5 * std::log(c));
    }
    case Family::SPB: {
      const double q = prior.q();
      const double log_ratio =
          std::lgamma(2.0 / q) - 0.5 * (std::lgamma(1.0 / q) + std::lgamma(3.0 / q));
      return std::sqrt(0.5 * std::numbers::pi) * std::exp(log_ratio);
    }
    default:
      throw UnsupportedFamily("expected_s: E[s] = 0 under SPN/sSPN (s is mean-zero normal)");
  }
}

double kurtosis(const PriorSpec& prior) {
  switch (prior.family()) {
    case Family::SNG: return 3.0 * (prior.c() + 1.0) / prior.c();
    case Family::SPB: {
      const double q = prior.q();
      return std::exp(std::lgamma(1.0 / q) + std::lgamma(5.0 / q) - 2.0 * std::lgamma(3.0 / q));
    }
    default: throw UnsupportedFamily("kurtosis: defined for SNG/SPB only");
  }
}

double max_correlation(const PriorSpec& prior) {
  if (prior.is_normal_scale()) return 1.0;
  const double es = expected_s(prior);
  return es * es;
}

MatrixXd marginal_covariance(const PriorSpec& prior, const CovStructure& omega) {
  const MatrixXd om = omega.materialize();
  MatrixXd sigma = om;
  if (prior.is_normal_scale()) {
    const MatrixXd psi = prior.psi().materialize();
    if (psi.rows() != om.rows()) throw InvalidInput("marginal_covariance: Psi/Omega dimension mismatch");
    return om.cwiseProduct(psi);
  }
  const double e2 = max_correlation(prior);
  for (Eigen::Index j = 0; j < sigma.rows(); ++j) {
    for (Eigen::Index k = 0; k < sigma.cols(); ++k) {
      if (j != k) sigma(j, k) *= e2;
    }
  }
  return sigma;
}

double fourth_cross_moment(const PriorSpec& prior, double c_omega_jk, double c_psi_jk) {
  if (!prior.is_normal_scale()) throw UnsupportedFamily("fourth_cross_moment: SPN/sSPN only");
  if (std::fabs(c_omega_jk) > 1.0 || std::fabs(c_psi_jk) > 1.0) {
    throw DomainError("fourth_cross_moment: correlations must lie in [-1, 1]");
  }
  const double c_sigma = c_omega_jk * c_psi_jk;
  return 1.0 + 2.0 * c_omega_jk * c_omega_jk + 2.0 * c_psi_jk * c_psi_jk + 4.0 * c_sigma * c_sigma;
}

MatrixXd simulate_scales(const PriorSpec& prior, std::size_t p, std::size_t n_draws, RngStream& rng) {
  MatrixXd s(n_draws, p);
  switch (prior.family()) {
    case Family::SPN:
    case Family::sSPN: {
      if (prior.psi().dim() != p) throw InvalidInput("simulate_prior: Psi dimension mismatch");
      const MatrixXd l = prior.psi().sqrt_factor();
      VectorXd e(p);
      for (std::size_t i = 0; i < n_draws; ++i) {
        for (std::size_t j = 0; j < p; ++j) e(j) = rng.normal();
        s.row(i) = (l * e).transpose();
      }
      break;
    }
    case Family::SNG: {
      const double c = prior.c();
      for (std::size_t i = 0; i < n_draws; ++i) {
        for (std::size_t j = 0; j < p; ++j) s(i, j) = std::sqrt(rng.gamma(c, c));
      }
      break;
    }
    case Family::SPB: {
      const double a = prior.alpha();
      for (std::size_t i = 0; i < n_draws; ++i) {
        for (std::size_t j = 0; j < p; ++j) s(i, j) = std::sqrt(sample_tilted_stable_scale(a, rng).s2);
      }
      break;
    }
  }
  return s;
}

MatrixXd simulate_prior(const PriorSpec& prior, const CovStructure& omega, std::size_t n_draws,
                        RngStream& rng) {
  const std::size_t p = omega.dim();
  const MatrixXd l = omega.sqrt_factor();
  MatrixXd beta = simulate_scales(prior, p, n_draws, rng);
  VectorXd e(p);
  for (std::size_t i = 0; i < n_draws; ++i) {
    for (std::size_t j = 0; j < p; ++j) e(j) = rng.normal();
    beta.row(i) = beta.row(i).cwiseProduct((l * e).transpose());
  }
  return beta;
}

MomEstimate mom_hyperparameters(const MatrixXd& sigma_hat, const PriorSpec& prior) {
  require_symmetric(sigma_hat, "mom_hyperparameters");
  const Eigen::Index p = sigma_hat.rows();
  if ((sigma_hat.diagonal().array() <= 0.0).any()) {
    throw InvalidInput("mom_hyperparameters: Sigma-hat has a non-positive diagonal entry");
  }
  MomEstimate out;
  if (prior.is_normal_scale()) {
    const MatrixXd root = sigma_hat.cwiseAbs().cwiseSqrt();
    MatrixXd signed_root = root;
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index k = 0; k < p; ++k) {
        if (sigma_hat(j, k) < 0.0) signed_root(j, k) = -root(j, k);
      }
    }
    const PsdProjection om = project_psd_report(root);
    const PsdProjection ps = project_psd_report(signed_root);
    // Move Psi's diagonal into Omega so that Psi has unit diagonal and the
    // Hadamard product is unchanged.
    const VectorXd d = ps.matrix.diagonal().cwiseMax(1e-300).cwiseSqrt();
    MatrixXd psi = ps.matrix;
    MatrixXd omega = om.matrix;
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index k = 0; k < p; ++k) {
        psi(j, k) /= d(j) * d(k);
        omega(j, k) *= d(j) * d(k);
      }
    }
    out.omega = omega;
    out.psi = psi;
    out.projection_active = om.active || ps.active;
    out.projection_residual = std::hypot(om.residual, ps.residual);
    return out;
  }
  const double e2 = max_correlation(prior);
  if (e2 < 1e-12) throw InvalidInput("mom_hyperparameters: E[s]^2 below 1e-12; map is degenerate");
  MatrixXd ratio = sigma_hat;
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = 0; k < p; ++k) {
      if (j != k) ratio(j, k) /= e2;
    }
  }
  const PsdProjection om = project_psd_report(ratio);
  out.omega = om.matrix;
  out.projection_active = om.active;
  out.projection_residual = om.residual;
  return out;
}

}  // namespace shp
