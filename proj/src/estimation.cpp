#include "shp/estimation.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>

#include "shp/errors.hpp"
#include "shp/stochastic.hpp"

namespace shp {

namespace {

constexpr double kInverseClamp = 1e100;

// Solve S x = b for SPD S after symmetric diagonal scaling, which keeps the
// factorization stable when penalty entries span many orders of magnitude.
VectorXd scaled_spd_solve(const MatrixXd& s, const VectorXd& b) {
  const VectorXd d = s.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  MatrixXd k = d.asDiagonal() * s * d.asDiagonal();
  k = 0.5 * (k + k.transpose());
  Eigen::LLT<MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) {
    k.diagonal().array() += 1e-12;
    llt.compute(k);
    if (llt.info() != Eigen::Success) {
      Eigen::LDLT<MatrixXd> ldlt(k);
      if (ldlt.info() != Eigen::Success) throw DecompositionError("M-step: system is singular");
      return d.asDiagonal() * ldlt.solve(d.asDiagonal() * b);
    }
  }
  return d.asDiagonal() * llt.solve(d.asDiagonal() * b);
}

MatrixXd padded_penalty(const MatrixXd& penalty, Eigen::Index coef_dim) {
  MatrixXd out = MatrixXd::Zero(coef_dim, coef_dim);
  out.topLeftCorner(penalty.rows(), penalty.cols()) = penalty;
  return out;
}

double penalized_objective(const Likelihood& likelihood, const MatrixXd& penalty, const VectorXd& coef) {
  const VectorXd beta = coef.head(likelihood.p());
  return likelihood.negative_log_likelihood(coef) + 0.5 * beta.dot(penalty * beta);
}

Partition em_partition(const Likelihood& likelihood, AngleMode mode, RngStream& rng) {
  const auto p = static_cast<std::size_t>(likelihood.p());
  if (mode == AngleMode::Single) {
    Partition one(1);
    for (std::size_t j = 0; j < p; ++j) one[0].push_back(j);
    return one;
  }
  if (mode == AngleMode::All) {
    Partition all;
    for (std::size_t j = 0; j < p; ++j) all.push_back({j});
    return all;
  }
  return partition_design(likelihood.x(), rng);
}

// Persistent chain on s | beta used by the E-step.
class ScaleChain {
 public:
  ScaleChain(const MatrixXd& omega_inv, const PriorSpec& prior, Partition groups, const EmConfig& config)
      : target_(omega_inv, prior),
        prior_(prior),
        groups_(std::move(groups)),
        config_(config),
        rng_(RngStream(config.seed).substream(2)) {
    state_ = GibbsState::initial(target_.dim(), groups_.size(), prior);
    if (prior.family() == Family::SPB) target_.set_delta(state_.delta);
  }

  MatrixXd expected_inverse_outer(const VectorXd& beta, std::map<std::string, std::size_t>& warnings) {
    const auto p = static_cast<Eigen::Index>(target_.dim());
    state_.beta = beta;
    VectorXd start = VectorXd::Ones(p);
    if (target_.signed_scales() && rng_.uniform() < 0.5) start = -start;
    ModeResult mode = tune_m_coordinate_descent(target_, beta, config_.cd_max_iter, config_.cd_tol, start);
    ScaleResult scale = tune_v(target_, mode.m, beta);
    warnings["cd_fallback"] += mode.fallbacks;
    warnings["v_clamped"] += scale.clamped;
    const EssTuning tuning{std::move(mode.m), std::move(scale.v), config_.nu, groups_};

    const std::size_t burn = config_.draws_per_step / 10;
    MatrixXd sum = MatrixXd::Zero(p, p);
    VectorXd inv(p);
    for (std::size_t d = 0; d < config_.draws_per_step; ++d) {
      ess_update_s(state_, target_, tuning, rng_);
      if (prior_.family() == Family::SPB) {
        const double alpha = prior_.alpha();
        for (Eigen::Index j = 0; j < p; ++j) {
          state_.xi(j) = tilted_stable_xi_from_s2(state_.s(j) * state_.s(j), alpha);
          state_.delta(j) = sample_delta_conditional(state_.xi(j), alpha, state_.delta(j), rng_);
        }
        target_.set_delta(state_.delta);
      }
      if (d < burn) continue;
      for (Eigen::Index j = 0; j < p; ++j) inv(j) = std::clamp(1.0 / state_.s(j), -kInverseClamp, kInverseClamp);
      sum.noalias() += inv * inv.transpose();
    }
    sum /= static_cast<double>(config_.draws_per_step - burn);
    return 0.5 * (sum + sum.transpose());
  }

 private:
  ScaleTarget target_;
  PriorSpec prior_;
  Partition groups_;
  const EmConfig& config_;
  RngStream rng_;
  GibbsState state_;
};

}  // namespace

void EmConfig::validate() const {
  if (draws_per_step < 100) throw InvalidInput("EmConfig: draws_per_step must be at least 100");
  if (!(tol > 0.0)) throw InvalidInput("EmConfig: tol must be positive");
  if (max_iter == 0) throw InvalidInput("EmConfig: max_iter must be at least 1");
  if (!(nu > 0.0)) throw InvalidInput("EmConfig: nu must be positive");
}

VectorXd penalized_mode(const Likelihood& likelihood, const MatrixXd& penalty, const VectorXd& start) {
  const Eigen::Index d = likelihood.coef_dim();
  if (penalty.rows() != likelihood.p() || penalty.cols() != likelihood.p()) {
    throw InvalidInput("penalized_mode: penalty has wrong size");
  }
  const MatrixXd pen = padded_penalty(penalty, d);
  if (!likelihood.is_logistic()) {
    const QuadraticForm q = likelihood.quadratic();
    return scaled_spd_solve(q.A + pen, q.h);
  }
  VectorXd coef = start.size() == d ? start : VectorXd(VectorXd::Zero(d));
  const MatrixXd& x = likelihood.design();
  const VectorXd& y = likelihood.y();
  double current = penalized_objective(likelihood, penalty, coef);
  for (int it = 0; it < 200; ++it) {
    const VectorXd eta = x * coef;
    VectorXd mu(eta.size());
    VectorXd weight(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      mu(i) = 1.0 / (1.0 + std::exp(-eta(i)));
      weight(i) = mu(i) * (1.0 - mu(i));
    }
    const VectorXd grad = x.transpose() * (mu - y) + pen * coef;
    const MatrixXd hess = x.transpose() * weight.asDiagonal() * x + pen;
    const VectorXd dscale = hess.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    if (dscale.cwiseProduct(grad).norm() < 1e-8) break;
    const VectorXd step = scaled_spd_solve(hess + 1e-12 * MatrixXd::Identity(d, d), grad);
    double t = 1.0;
    VectorXd next = coef - step;
    double value = penalized_objective(likelihood, penalty, next);
    while (!(value <= current) && t > 1e-10) {
      t *= 0.5;
      next = coef - t * step;
      value = penalized_objective(likelihood, penalty, next);
    }
    if (!(value <= current)) break;
    const bool stalled = current - value <= 1e-15 * std::max(1.0, std::abs(current));
    coef = next;
    current = value;
    if (stalled) break;
  }
  return coef;
}

EmResult em_posterior_mode(const Likelihood& likelihood, const PriorSpec& prior, const CovStructure& omega,
                           const EmConfig& config) {
  config.validate();
  const Eigen::Index p = likelihood.p();
  if (static_cast<Eigen::Index>(omega.dim()) != p) throw InvalidInput("em_posterior_mode: Omega has wrong dimension");
  const MatrixXd omega_inv = omega.inverse();

  RngStream rng(config.seed);
  RngStream partition_rng = rng.substream(1);
  Partition groups = em_partition(likelihood, config.angle_mode, partition_rng);
  ScaleChain chain(omega_inv, prior, std::move(groups), config);

  EmResult out;
  out.warnings = {{"cd_fallback", 0}, {"v_clamped", 0}};
  VectorXd coef = VectorXd::Zero(likelihood.coef_dim());
  if (config.beta_start) {
    if (config.beta_start->size() != p) throw InvalidInput("em_posterior_mode: beta_start has wrong length");
    coef.head(p) = *config.beta_start;
  } else {
    coef = penalized_mode(likelihood, omega_inv, coef);
  }

  for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
    const MatrixXd e_inv = chain.expected_inverse_outer(coef.head(p), out.warnings);
    const MatrixXd penalty = omega_inv.cwiseProduct(e_inv);
    const VectorXd next = penalized_mode(likelihood, penalty, coef);
    out.objective_trace.push_back(penalized_objective(likelihood, penalty, next));
    const double change = (next.head(p) - coef.head(p)).squaredNorm();
    coef = next;
    ++out.iterations;
    if (change < config.tol) {
      out.converged = true;
      break;
    }
  }
  out.beta = coef.head(p);
  if (likelihood.has_intercept()) out.gamma = coef(p);
  for (Eigen::Index j = 0; j < p; ++j) out.sparsity.push_back(std::abs(out.beta(j)) < kSparsityThreshold);
  return out;
}

MatrixXd omega_for_marginal_correlation(const PriorSpec& prior, double rho) {
  if (!(std::abs(rho) < 1.0)) throw InvalidInput("marginal correlation must lie in (-1, 1)");
  double off = 0.0;
  if (prior.is_normal_scale()) {
    const MatrixXd psi = prior.psi().materialize();
    if (psi.rows() != 2) throw InvalidInput("omega_for_marginal_correlation: Psi must be 2 x 2");
    if (rho != 0.0) {
      if (psi(0, 1) == 0.0) throw InvalidInput("marginal correlation unreachable with uncorrelated Psi");
      off = rho / psi(0, 1);
    }
  } else {
    off = rho / max_correlation(prior);
  }
  if (std::abs(off) > 1.0) {
    throw InvalidInput("marginal correlation " + std::to_string(rho) + " exceeds the family's maximum");
  }
  MatrixXd omega(2, 2);
  omega << 1.0, off, off, 1.0;
  return omega;
}

std::vector<ThresholdPoint> bivariate_threshold_surface(const PriorSpec& prior, const CovStructure& omega,
                                                        double phi2, const std::vector<double>& ols2_values,
                                                        const std::vector<double>& ols1_grid,
                                                        const EmConfig& config) {
  if (omega.dim() != 2) throw InvalidInput("bivariate_threshold_surface: Omega must be 2 x 2");
  const RngStream root(config.seed);
  std::vector<ThresholdPoint> out;
  std::uint64_t k = 0;
  for (double ols2 : ols2_values) {
    for (double ols1 : ols1_grid) {
      VectorXd y(2);
      y << ols1, ols2;
      const Likelihood lik = Likelihood::gaussian(MatrixXd::Identity(2, 2), y, phi2);
      EmConfig cfg = config;
      cfg.seed = root.substream(k++).seed();
      const EmResult r = em_posterior_mode(lik, prior, omega, cfg);
      out.push_back({ols1, ols2, r.beta(0), r.beta(1)});
    }
  }
  return out;
}

double univariate_threshold(const PriorSpec& prior, double phi2, double ols, const EmConfig& config) {
  const Likelihood lik = Likelihood::gaussian(MatrixXd::Identity(1, 1), VectorXd::Constant(1, ols), phi2);
  PriorSpec one = prior;
  if (prior.is_normal_scale()) one = PriorSpec::spn(CovStructure::identity(1));
  return em_posterior_mode(lik, one, CovStructure::identity(1), config).beta(0);
}

namespace {

// tr(AR1(rho)^-1 g) from the tridiagonal inverse.
double ar1_inverse_trace(double rho, const MatrixXd& g) {
  const Eigen::Index p = g.rows();
  if (p == 1) return g(0, 0);
  double interior = 0.0;
  double off = 0.0;
  for (Eigen::Index j = 1; j + 1 < p; ++j) interior += g(j, j);
  for (Eigen::Index j = 0; j + 1 < p; ++j) off += g(j, j + 1) + g(j + 1, j);
  return (g(0, 0) + g(p - 1, p - 1) + (1.0 + rho * rho) * interior - rho * off) / (1.0 - rho * rho);
}

// 1/2 [copies (p - 1) log(1 - rho^2) + tr(AR1^-1 g)].
double ar1_objective(double rho, const MatrixXd& g, double copies) {
  const double p = static_cast<double>(g.rows());
  return 0.5 * (copies * (p - 1.0) * std::log(1.0 - rho * rho) + ar1_inverse_trace(rho, g));
}

template <class F>
double golden_minimize(F&& f, double lo, double hi, double tol) {
  // Coarse scan first so the golden-section stage starts in the right basin.
  constexpr int kScan = 200;
  double best_x = lo;
  double best_f = HUGE_VAL;
  for (int i = 0; i <= kScan; ++i) {
    const double x = lo + (hi - lo) * i / kScan;
    const double v = f(x);
    if (v < best_f) {
      best_f = v;
      best_x = x;
    }
  }
  const double width = (hi - lo) / kScan;
  double a = std::max(lo, best_x - width);
  double b = std::min(hi, best_x + width);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

constexpr double kRhoBound = 1.0 - 1e-9;

MatrixXd block_weighted_sum(const MatrixXd& e, const MatrixXd& weights, Eigen::Index p1) {
  const Eigen::Index p2 = weights.rows();
  MatrixXd g = MatrixXd::Zero(p1, p1);
  for (Eigen::Index l = 0; l < p2; ++l) {
    for (Eigen::Index j = 0; j < p2; ++j) g += weights(l, j) * e.block(j * p1, l * p1, p1, p1);
  }
  return g;
}

}  // namespace

double ar1_mstep_objective(double rho, const MatrixXd& e_zz) {
  if (!(std::abs(rho) < 1.0)) return HUGE_VAL;
  return ar1_objective(rho, e_zz, 1.0);
}

double ar1_mstep(const MatrixXd& e_zz) {
  if (e_zz.rows() != e_zz.cols() || e_zz.rows() == 0) throw InvalidInput("ar1_mstep: E must be square");
  return golden_minimize([&](double r) { return ar1_objective(r, e_zz, 1.0); }, -kRhoBound, kRhoBound, 1e-12);
}

KroneckerMstep kronecker_mstep(const MatrixXd& e_zz, std::size_t p1, std::size_t p2, double rho_start,
                               std::size_t max_sweeps, double tol) {
  const auto n1 = static_cast<Eigen::Index>(p1);
  const auto n2 = static_cast<Eigen::Index>(p2);
  if (e_zz.rows() != n1 * n2 || e_zz.cols() != n1 * n2) throw InvalidInput("kronecker_mstep: E has wrong size");
  KroneckerMstep out;
  out.rho = rho_start;
  out.omega2 = MatrixXd::Identity(n2, n2);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    const MatrixXd omega1_inv = ar1_inverse(out.rho, p1);
    MatrixXd c(n2, n2);
    for (Eigen::Index l = 0; l < n2; ++l) {
      for (Eigen::Index j = 0; j < n2; ++j) {
        c(l, j) = (omega1_inv * e_zz.block(l * n1, j * n1, n1, n1)).trace();
      }
    }
    MatrixXd omega2 = c / static_cast<double>(p1);
    omega2 = project_psd(0.5 * (omega2 + omega2.transpose()));
    omega2.diagonal().array() += 1e-12 * std::max(omega2.trace(), 1e-300);
    const MatrixXd g = block_weighted_sum(e_zz, spd_inverse(omega2), n1);
    const double copies = static_cast<double>(p2);
    const double rho = golden_minimize([&](double r) { return ar1_objective(r, g, copies); }, -kRhoBound,
                                       kRhoBound, 1e-12);
    const double change = std::abs(rho - out.rho) + (omega2 - out.omega2).norm();
    out.rho = rho;
    out.omega2 = omega2;
    out.objective = ar1_objective(rho, g, copies) + 0.5 * static_cast<double>(p1) * log_det_spd(omega2);
    if (change < tol) break;
  }
  return out;
}

CovStructure MmleResult::omega(std::size_t p) const {
  if (omega2) {
    const std::size_t p2 = static_cast<std::size_t>(omega2->rows());
    return CovStructure::kronecker({CovStructure::dense(*omega2), CovStructure::ar1(rho, p / p2)});
  }
  return CovStructure::ar1(rho, p);
}

MmleResult mmle_omega(const Likelihood& likelihood, const PriorSpec& prior, const MmleConfig& config) {
  const auto p = static_cast<std::size_t>(likelihood.p());
  const bool kron = config.parametrization == OmegaParametrization::KroneckerFactors;
  if (kron && config.p1 * config.p2 != p) throw InvalidInput("mmle_omega: p1 * p2 must equal p");
  if (config.draws_per_step < 100) throw InvalidInput("mmle_omega: draws_per_step must be at least 100");
  if (!(std::abs(config.rho_start) < 1.0)) throw InvalidInput("mmle_omega: |rho_start| must be below 1");

  MmleResult out;
  out.rho = config.rho_start;
  if (kron) out.omega2 = MatrixXd::Identity(static_cast<Eigen::Index>(config.p2), static_cast<Eigen::Index>(config.p2));
  const RngStream root(config.seed);

  MmleResult best = out;
  double best_objective = HUGE_VAL;
  for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
    ChainConfig cc;
    cc.iterations = config.draws_per_step + config.draws_per_step / 10;
    cc.burnin = config.draws_per_step / 10;
    cc.seed = root.substream(iter).seed();
    cc.nu = config.nu;
    cc.angle_mode = config.angle_mode;
    const ChainOutput chain = run_chain(likelihood, prior, out.omega(p), cc);
    if (chain.partial) throw SamplerError("mmle_omega", chain.error);

    const Eigen::Index n = chain.draws.rows();
    const auto pp = static_cast<Eigen::Index>(p);
    const MatrixXd z = chain.draws.leftCols(pp).cwiseQuotient(chain.draws.middleCols(pp, pp));
    const MatrixXd e_zz = z.transpose() * z / static_cast<double>(n);

    double rho = 0.0;
    std::optional<MatrixXd> omega2;
    double objective = 0.0;
    if (kron) {
      const KroneckerMstep m = kronecker_mstep(e_zz, config.p1, config.p2, out.rho);
      rho = m.rho;
      omega2 = m.omega2;
      objective = m.objective;
    } else {
      rho = ar1_mstep(e_zz);
      objective = ar1_mstep_objective(rho, e_zz);
    }

    // Batch-means standard error of the per-draw objective 1/2 z' Omega^-1 z.
    const MatrixXd new_inv = [&] {
      MmleResult tmp;
      tmp.rho = rho;
      tmp.omega2 = omega2;
      return tmp.omega(p).inverse();
    }();
    const VectorXd per_draw = 0.5 * (z * new_inv).cwiseProduct(z).rowwise().sum();
    constexpr Eigen::Index kBatches = 20;
    const Eigen::Index batch = std::max<Eigen::Index>(1, n / kBatches);
    std::vector<double> means;
    for (Eigen::Index b = 0; b + batch <= n; b += batch) means.push_back(per_draw.segment(b, batch).mean());
    double se = 0.0;
    if (means.size() > 1) {
      double mu = 0.0;
      for (double m : means) mu += m;
      mu /= static_cast<double>(means.size());
      double var = 0.0;
      for (double m : means) var += (m - mu) * (m - mu);
      var /= static_cast<double>(means.size() - 1);
      se = std::sqrt(var / static_cast<double>(means.size()));
    }

    const double change = std::abs(rho - out.rho) + (omega2 ? (*omega2 - *out.omega2).norm() : 0.0);
    out.rho = rho;
    out.omega2 = omega2;
    out.objective_trace.push_back(objective);
    out.objective_se.push_back(se);
    out.rho_trace.push_back(rho);
    out.iterations = iter + 1;
    if (objective < best_objective) {
      best_objective = objective;
      best.rho = rho;
      best.omega2 = omega2;
    }
    if (change < config.tol) {
      out.converged = true;
      break;
    }
  }
  if (!out.converged) {
    out.rho = best.rho;
    out.omega2 = best.omega2;
  }
  return out;
}

}  // namespace shp
