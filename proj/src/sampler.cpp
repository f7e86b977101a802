#include "shp/sampler.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/Polynomials>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "shp/errors.hpp"
#include "shp/stochastic.hpp"

namespace shp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

bool is_integer(double x) { return std::abs(x - std::round(x)) < 1e-12; }

// Draw from N(P^-1 b, P^-1). Adds 1e-8 * trace / dim to the diagonal once if
// the Cholesky factorization fails.
VectorXd draw_canonical_normal(MatrixXd precision, const VectorXd& b, RngStream& rng,
                               std::size_t& jitter) {
  const Eigen::Index d = precision.rows();
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    const double bump = 1e-8 * std::max(precision.trace(), 1e-300) / static_cast<double>(d);
    precision.diagonal().array() += bump;
    llt.compute(precision);
    if (llt.info() != Eigen::Success) {
      throw DecompositionError("coefficient update: precision matrix is not positive definite");
    }
    ++jitter;
  }
  VectorXd mean = llt.solve(b);
  VectorXd eps(d);
  for (Eigen::Index i = 0; i < d; ++i) eps(i) = rng.normal();
  mean += llt.matrixU().solve(eps);
  return mean;
}

double empirical_logit(double mean_y, double n) {
  const double pos = mean_y * n;
  return std::log((pos + 0.5) / (n - pos + 0.5));
}

}  // namespace

bool is_partition(const Partition& groups, std::size_t p) {
  std::vector<int> seen(p, 0);
  for (const auto& g : groups) {
    if (g.empty()) return false;
    for (std::size_t j : g) {
      if (j >= p || seen[j]++) return false;
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; });
}

void EssTuning::validate() const {
  const auto p = static_cast<std::size_t>(m.size());
  if (static_cast<std::size_t>(v.size()) != p) throw InvalidInput("EssTuning: m and v differ in length");
  if (!m.allFinite()) throw InvalidInput("EssTuning: m must be finite");
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (!(v(j) > 0.0) || !std::isfinite(v(j))) throw InvalidInput("EssTuning: v must be positive");
  }
  if (!(nu > 0.0)) throw InvalidInput("EssTuning: nu must be positive");
  if (!is_partition(angle_groups, p)) throw InvalidInput("EssTuning: angle_groups is not a partition");
}

GibbsState GibbsState::initial(std::size_t p, std::size_t groups, const PriorSpec& prior) {
  const auto n = static_cast<Eigen::Index>(p);
  GibbsState st;
  st.beta = VectorXd::Zero(n);
  st.s = VectorXd::Ones(n);
  st.z = VectorXd::Zero(n);
  st.angles = VectorXd::Zero(static_cast<Eigen::Index>(groups));
  st.w = VectorXd::Ones(n);
  st.u = VectorXd::Zero(n);
  st.r = VectorXd::Zero(n);
  if (prior.family() == Family::SPB) {
    st.delta = VectorXd::Constant(n, kPi / 2.0);
    st.xi = VectorXd::Constant(n, tilted_stable_xi_from_s2(1.0, prior.alpha()));
  }
  return st;
}

double CoordinateKappa::objective(double s) const {
  if (s == 0.0) return kNegInf;
  return k1 / (s * s) + k2 / s + k3 * std::log(s * s) + k4 * s + k5 * std::pow(std::abs(s), k6);
}

double CoordinateKappa::stationarity(double s) const {
  return -2.0 * k1 - k2 * s + 2.0 * k3 * s * s + k4 * s * s * s +
         k5 * k6 * std::pow(std::abs(s), k6 + 2.0);
}

double CoordinateKappa::second_derivative(double s) const {
  const double s2 = s * s;
  return 6.0 * k1 / (s2 * s2) + 2.0 * k2 / (s2 * s) - 2.0 * k3 / s2 +
         k5 * k6 * (k6 - 1.0) * std::pow(std::abs(s), k6 - 2.0);
}

ScaleTarget::ScaleTarget(MatrixXd omega_inv, PriorSpec prior, VectorXd delta)
    : omega_inv_(std::move(omega_inv)), prior_(std::move(prior)) {
  if (omega_inv_.rows() != omega_inv_.cols()) throw InvalidInput("ScaleTarget: omega_inv must be square");
  if (prior_.is_normal_scale()) {
    psi_inv_ = prior_.psi().inverse();
    if (psi_inv_.rows() != omega_inv_.rows()) throw InvalidInput("ScaleTarget: Psi and Omega differ in size");
  }
  if (prior_.family() == Family::SPB) {
    const double a = prior_.alpha();
    spb_power_ = a / (1.0 - a);
    spb_scale_ = std::pow(2.0 * std::tgamma(3.0 / (2.0 * a)) / std::tgamma(1.0 / (2.0 * a)), spb_power_);
    if (delta.size() == 0) delta = VectorXd::Constant(omega_inv_.rows(), kPi / 2.0);
    set_delta(std::move(delta));
  }
}

void ScaleTarget::set_omega_inv(MatrixXd omega_inv) {
  if (omega_inv.rows() != omega_inv_.rows() || omega_inv.cols() != omega_inv_.cols()) {
    throw InvalidInput("ScaleTarget: omega_inv changed size");
  }
  omega_inv_ = std::move(omega_inv);
}

void ScaleTarget::set_psi_inv(MatrixXd psi_inv) {
  if (psi_inv.rows() != omega_inv_.rows()) throw InvalidInput("ScaleTarget: psi_inv has wrong size");
  psi_inv_ = std::move(psi_inv);
}

void ScaleTarget::set_delta(VectorXd delta) {
  if (prior_.family() != Family::SPB) return;
  if (delta.size() != omega_inv_.rows()) throw InvalidInput("ScaleTarget: delta has wrong length");
  f_delta_.resize(delta.size());
  for (Eigen::Index j = 0; j < delta.size(); ++j) f_delta_(j) = tilted_stable_f(delta(j), prior_.alpha());
  delta_ = std::move(delta);
}

double ScaleTarget::log_density(const VectorXd& s, const VectorXd& beta) const {
  const Eigen::Index p = s.size();
  if (beta.size() != p || omega_inv_.rows() != p) throw InvalidInput("s_log_conditional: dimension mismatch");
  VectorXd ratio(p);
  double total = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (s(j) == 0.0) return kNegInf;
    ratio(j) = beta(j) / s(j);
    total -= std::log(std::abs(s(j)));
  }
  total -= 0.5 * ratio.dot(omega_inv_ * ratio);
  switch (prior_.family()) {
    case Family::SPN:
    case Family::sSPN:
      total -= 0.5 * s.dot(psi_inv_ * s);
      break;
    case Family::SNG: {
      const double c = prior_.c();
      for (Eigen::Index j = 0; j < p; ++j) {
        const double a = std::abs(s(j));
        total += (2.0 * c - 1.0) * std::log(a) - c * a * a;
      }
      break;
    }
    case Family::SPB: {
      const double expo = 2.0 * spb_power_;
      for (Eigen::Index j = 0; j < p; ++j) {
        const double a = std::abs(s(j));
        total += expo * std::log(a) - spb_scale_ * std::pow(a, expo) * f_delta_(j);
      }
      break;
    }
  }
  return total;
}

CoordinateKappa ScaleTarget::kappa(std::size_t j, const VectorXd& s, const VectorXd& beta) const {
  const auto jj = static_cast<Eigen::Index>(j);
  const Eigen::Index p = s.size();
  CoordinateKappa k;
  k.k1 = -0.5 * beta(jj) * beta(jj) * omega_inv_(jj, jj);
  double cross = 0.0;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (i != jj && omega_inv_(jj, i) != 0.0) cross += omega_inv_(jj, i) * beta(i) / s(i);
  }
  k.k2 = -beta(jj) * cross;
  switch (prior_.family()) {
    case Family::SPN:
    case Family::sSPN: {
      double psi_cross = 0.0;
      for (Eigen::Index i = 0; i < p; ++i) {
        if (i != jj) psi_cross += psi_inv_(jj, i) * s(i);
      }
      k.k3 = -0.5;
      k.k4 = -psi_cross;
      k.k5 = -0.5 * psi_inv_(jj, jj);
      k.k6 = 2.0;
      break;
    }
    case Family::SNG:
      k.k3 = prior_.c() - 1.0;
      k.k5 = -prior_.c();
      k.k6 = 2.0;
      break;
    case Family::SPB: {
      const double a = prior_.alpha();
      k.k3 = (1.0 + a) / (2.0 * (1.0 - a)) - 1.0;
      k.k5 = -spb_scale_ * f_delta_(jj);
      k.k6 = 2.0 * spb_power_;
      break;
    }
  }
  return k;
}

double s_log_conditional(const VectorXd& s, const VectorXd& beta, const MatrixXd& omega_inv,
                         const PriorSpec& prior, const VectorXd* delta) {
  const ScaleTarget target(omega_inv, prior, delta ? *delta : VectorXd());
  return target.log_density(s, beta);
}

double ess_angle_log_target(const ScaleTarget& target, const VectorXd& s_tilde, const VectorXd& beta,
                            const EssTuning& tuning) {
  if (!target.signed_scales()) {
    for (Eigen::Index j = 0; j < s_tilde.size(); ++j) {
      if (!(s_tilde(j) > 0.0)) return kNegInf;
    }
  }
  double value = target.log_density(s_tilde, beta);
  const double half = 0.5 * (tuning.nu + 1.0);
  for (Eigen::Index j = 0; j < s_tilde.size(); ++j) {
    const double d = (s_tilde(j) - tuning.m(j)) / tuning.v(j);
    value += half * std::log1p(d * d / tuning.nu);
  }
  return value;
}

EssDiagnostics ess_update_s(GibbsState& state, const ScaleTarget& target, const EssTuning& tuning,
                            RngStream& rng) {
  tuning.validate();
  const Eigen::Index p = state.s.size();
  if (tuning.m.size() != p || state.beta.size() != p) throw InvalidInput("ess_update_s: dimension mismatch");
  if (static_cast<std::size_t>(state.angles.size()) != tuning.angle_groups.size()) {
    state.angles = VectorXd::Zero(static_cast<Eigen::Index>(tuning.angle_groups.size()));
  }
  if (!target.signed_scales() && (state.s.array() <= 0.0).any()) {
    throw InvalidInput("ess_update_s: scales must be positive for this family");
  }

  state.w.resize(p);
  state.u.resize(p);
  state.r.resize(p);
  VectorXd t(p);
  const VectorXd x = state.s - tuning.m;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double scaled = x(j) / tuning.v(j);
    state.w(j) = rng.gamma(0.5 * (tuning.nu + 1.0), 0.5 * tuning.nu + 0.5 * scaled * scaled);
    t(j) = rng.normal() * tuning.v(j) / std::sqrt(state.w(j));
  }
  for (std::size_t b = 0; b < tuning.angle_groups.size(); ++b) {
    const double phi = state.angles(static_cast<Eigen::Index>(b));
    const double sp = std::sin(phi);
    const double cp = std::cos(phi);
    for (std::size_t j : tuning.angle_groups[b]) {
      const auto i = static_cast<Eigen::Index>(j);
      state.u(i) = x(i) * sp + t(i) * cp;
      state.r(i) = x(i) * cp - t(i) * sp;
    }
  }

  EssDiagnostics diag;
  VectorXd current = state.s;
  VectorXd trial = current;
  for (std::size_t b = 0; b < tuning.angle_groups.size(); ++b) {
    const auto& group = tuning.angle_groups[b];
    const double phi = state.angles(static_cast<Eigen::Index>(b));
    auto log_target = [&](double theta) {
      ++diag.slice_evaluations;
      trial = current;
      if (theta != phi) {
        const double st = std::sin(theta);
        const double ct = std::cos(theta);
        for (std::size_t j : group) {
          const auto i = static_cast<Eigen::Index>(j);
          trial(i) = state.u(i) * st + state.r(i) * ct + tuning.m(i);
        }
      }
      return ess_angle_log_target(target, trial, state.beta, tuning);
    };
    double theta = phi;
    try {
      theta = slice_sample(log_target, -kPi, kPi, phi, rng);
    } catch (const SamplerError& e) {
      throw SamplerError("ess_update_s", e.what());
    } catch (const InvalidInput& e) {
      throw SamplerError("ess_update_s", e.what());
    }
    state.angles(static_cast<Eigen::Index>(b)) = theta;
    if (theta != phi) {
      const double st = std::sin(theta);
      const double ct = std::cos(theta);
      for (std::size_t j : group) {
        const auto i = static_cast<Eigen::Index>(j);
        current(i) = state.u(i) * st + state.r(i) * ct + tuning.m(i);
      }
    }
  }
  state.s = target.signed_scales() ? current : VectorXd(current.cwiseAbs());
  return diag;
}

namespace {

double polish_newton(const VectorXd& coeffs, double x) {
  for (int it = 0; it < 50; ++it) {
    long double f = 0.0L;
    long double df = 0.0L;
    for (Eigen::Index k = coeffs.size() - 1; k >= 0; --k) {
      df = df * x + f;
      f = f * x + coeffs(k);
    }
    if (df == 0.0L) break;
    const double step = static_cast<double>(f / df);
    const double next = x - step;
    if (!std::isfinite(next)) break;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) {
      x = next;
      break;
    }
    x = next;
  }
  return x;
}

// Stationary points of the coordinate objective when k6 is an integer,
// from the roots of s^3 g'(s).
std::vector<double> polynomial_stationary_points(const CoordinateKappa& k, int k6) {
  const int degree = std::max(3, k6 + 2);
  VectorXd c = VectorXd::Zero(degree + 1);
  c(0) = -2.0 * k.k1;
  c(1) = -k.k2;
  c(2) = 2.0 * k.k3;
  c(3) += k.k4;
  c(k6 + 2) += k.k5 * k6;
  // Trim vanishing leading and trailing coefficients; trailing zeros are roots at s = 0.
  Eigen::Index hi = c.size() - 1;
  const double scale = c.cwiseAbs().maxCoeff();
  if (scale == 0.0) return {};
  while (hi > 0 && std::abs(c(hi)) <= 1e-300) --hi;
  Eigen::Index lo = 0;
  while (lo < hi && c(lo) == 0.0) ++lo;
  if (hi - lo < 1) return {};
  const VectorXd reduced = c.segment(lo, hi - lo + 1);
  std::vector<double> out;
  if (reduced.size() == 2) {
    out.push_back(-reduced(0) / reduced(1));
  } else {
    Eigen::PolynomialSolver<double, Eigen::Dynamic> solver;
    solver.compute(reduced);
    for (const auto& root : solver.roots()) {
      if (std::abs(root.imag()) <= 1e-6 * std::max(1.0, std::abs(root.real()))) {
        out.push_back(polish_newton(reduced, root.real()));
      }
    }
  }
  return out;
}

std::optional<double> bracket_positive_maximizer(const CoordinateKappa& k, double lo, double hi) {
  lo = std::max(lo, 1e-300);
  for (int i = 0; i < 2000 && !(k.stationarity(lo) > 0.0); ++i) {
    lo *= 0.5;
    if (lo < 1e-300) return std::nullopt;
  }
  for (int i = 0; i < 2000 && !(k.stationarity(hi) < 0.0); ++i) {
    hi *= 2.0;
    if (!std::isfinite(hi) || hi > 1e300) return std::nullopt;
  }
  if (!(k.stationarity(lo) > 0.0) || !(k.stationarity(hi) < 0.0)) return std::nullopt;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (k.stationarity(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::optional<double> maximize_coordinate(const CoordinateKappa& kappa, bool allow_negative) {
  std::vector<double> candidates;
  if (is_integer(kappa.k6)) {
    candidates = polynomial_stationary_points(kappa, static_cast<int>(std::lround(kappa.k6)));
  } else if (!allow_negative) {
    // Maximizers under floor(k6) and ceil(k6) exponents bracket the
    // maximizer under k6; bisection on the stationarity function finishes.
    double lo = HUGE_VAL;
    double hi = 0.0;
    for (double e : {std::floor(kappa.k6), std::ceil(kappa.k6)}) {
      CoordinateKappa side = kappa;
      side.k6 = e;
      if (e == 0.0) continue;
      for (double r : polynomial_stationary_points(side, static_cast<int>(e))) {
        if (r > 0.0 && std::isfinite(r)) {
          lo = std::min(lo, r);
          hi = std::max(hi, r);
        }
      }
    }
    if (!(hi > 0.0)) {
      lo = 1.0;
      hi = 1.0;
    }
    if (auto root = bracket_positive_maximizer(kappa, lo, hi)) candidates.push_back(*root);
  } else {
    throw UnsupportedFamily("maximize_coordinate: signed scales need an integer exponent");
  }

  std::optional<double> best;
  double best_value = kNegInf;
  for (double r : candidates) {
    if (!std::isfinite(r) || r == 0.0) continue;
    if (!allow_negative && r < 0.0) continue;
    const double value = kappa.objective(r);
    if (std::isfinite(value) && value > best_value) {
      best_value = value;
      best = r;
    }
  }
  return best;
}

ModeResult tune_m_coordinate_descent(const ScaleTarget& target, const VectorXd& beta, std::size_t max_iter,
                                     double tol, VectorXd start) {
  const auto p = static_cast<Eigen::Index>(target.dim());
  if (beta.size() != p) throw InvalidInput("tune_m_coordinate_descent: beta has wrong length");
  ModeResult out;
  out.m = start.size() == 0 ? VectorXd::Ones(p) : std::move(start);
  if (out.m.size() != p) throw InvalidInput("tune_m_coordinate_descent: start has wrong length");
  const bool signed_scales = target.signed_scales();
  for (std::size_t sweep = 0; sweep < max_iter; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const CoordinateKappa k = target.kappa(static_cast<std::size_t>(j), out.m, beta);
      double next = 1.0;
      if (auto best = maximize_coordinate(k, signed_scales)) {
        next = *best;
      } else {
        ++out.fallbacks;
      }
      max_change = std::max(max_change, std::abs(next - out.m(j)));
      out.m(j) = next;
    }
    ++out.sweeps;
    if (max_change < tol) break;
  }
  return out;
}

ScaleResult tune_v(const ScaleTarget& target, const VectorXd& m, const VectorXd& beta) {
  const Eigen::Index p = m.size();
  if (!m.allFinite()) throw InvalidInput("tune_v: m must be finite");
  VectorXd guarded = m;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::abs(guarded(j)) <= 1e-12) guarded(j) = guarded(j) < 0.0 ? -1e-12 : 1e-12;
  }
  ScaleResult out;
  out.v.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const CoordinateKappa k = target.kappa(static_cast<std::size_t>(j), guarded, beta);
    const double curvature = k.second_derivative(guarded(j));
    if (curvature < 0.0) {
      out.v(j) = std::clamp(1.0 / std::sqrt(-curvature), 1e-6, 1e6);
    } else {
      out.v(j) = 1.0;
      ++out.clamped;
    }
  }
  return out;
}

Partition partition_design(const MatrixXd& x, RngStream& rng) {
  if (!x.allFinite()) throw InvalidInput("partition_design: X must be finite");
  const auto p = static_cast<std::size_t>(x.cols());
  Partition groups;
  std::vector<std::size_t> remaining(p);
  for (std::size_t j = 0; j < p; ++j) remaining[j] = j;

  const MatrixXd gram = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  VectorXd d = eig.eigenvalues().cwiseMax(0.0);
  const double total = d.sum();
  if (total > 0.0) {
    // Eigenvalues come back ascending; walk them from the largest.
    for (Eigen::Index i = static_cast<Eigen::Index>(p) - 1; i >= 0 && !remaining.empty(); --i) {
      const double share = d(i) / total;
      auto k = static_cast<std::size_t>(std::lround(static_cast<double>(p) * share));
      if (k == 0) break;
      k = std::min(k, remaining.size());
      std::vector<std::size_t> group;
      for (std::size_t draw = 0; draw < k; ++draw) {
        double weight_sum = 0.0;
        for (std::size_t j : remaining) weight_sum += std::abs(eig.eigenvectors()(static_cast<Eigen::Index>(j), i));
        std::size_t pick = remaining.size() - 1;
        if (weight_sum > 0.0) {
          double target = rng.uniform() * weight_sum;
          for (std::size_t a = 0; a < remaining.size(); ++a) {
            target -= std::abs(eig.eigenvectors()(static_cast<Eigen::Index>(remaining[a]), i));
            if (target <= 0.0) {
              pick = a;
              break;
            }
          }
        } else {
          pick = static_cast<std::size_t>(rng.below(remaining.size()));
        }
        group.push_back(remaining[pick]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
      }
      std::sort(group.begin(), group.end());
      groups.push_back(std::move(group));
    }
  }
  for (std::size_t j : remaining) groups.push_back({j});
  return groups;
}

std::size_t update_coefficients(GibbsState& state, const QuadraticForm& q, const MatrixXd& omega_inv,
                                bool intercept, RngStream& rng) {
  const Eigen::Index p = state.s.size();
  const Eigen::Index d = p + (intercept ? 1 : 0);
  if (q.A.rows() != d || q.h.size() != d || omega_inv.rows() != p) {
    throw InvalidInput("update_coefficients: dimension mismatch");
  }
  VectorXd scale(d);
  scale.head(p) = state.s;
  if (intercept) scale(p) = 1.0;
  MatrixXd precision = q.A.cwiseProduct(scale * scale.transpose());
  precision.topLeftCorner(p, p) += omega_inv;
  std::size_t jitter = 0;
  const VectorXd draw = draw_canonical_normal(std::move(precision), scale.cwiseProduct(q.h), rng, jitter);
  state.z = draw.head(p);
  state.beta = state.s.cwiseProduct(state.z);
  if (intercept) state.gamma_intercept = draw(p);
  return jitter;
}

std::size_t spn_block_gibbs(GibbsState& state, const QuadraticForm& q, const MatrixXd& omega_inv,
                            const MatrixXd& psi_inv, bool intercept, RngStream& rng) {
  const Eigen::Index p = state.s.size();
  if (psi_inv.rows() != p) throw InvalidInput("spn_block_gibbs: Psi has wrong size");
  std::size_t jitter = update_coefficients(state, q, omega_inv, intercept, rng);

  VectorXd h = q.h.head(p);
  if (intercept) h -= q.A.block(0, p, p, 1) * state.gamma_intercept;
  MatrixXd precision = q.A.topLeftCorner(p, p).cwiseProduct(state.z * state.z.transpose()) + psi_inv;
  state.s = draw_canonical_normal(std::move(precision), state.z.cwiseProduct(h), rng, jitter);
  state.beta = state.s.cwiseProduct(state.z);
  return jitter;
}

QuadraticForm update_logistic_latents(GibbsState& state, const Likelihood& likelihood, RngStream& rng) {
  if (!likelihood.is_logistic()) throw InvalidInput("update_logistic_latents: likelihood is not logistic");
  const Eigen::Index p = likelihood.p();
  VectorXd coef(likelihood.coef_dim());
  coef.head(p) = state.beta;
  if (likelihood.has_intercept()) coef(p) = state.gamma_intercept;
  const VectorXd eta = likelihood.design() * coef;
  state.pg_omega.resize(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) state.pg_omega(i) = sample_polya_gamma(1.0, eta(i), rng);
  return likelihood.quadratic(state.pg_omega);
}

double rho_log_target(double rho, const MatrixXd& m, const MatrixXd& factor2_inv, RhoPrior prior) {
  if (!(std::abs(rho) < 1.0)) return kNegInf;
  const Eigen::Index p1 = m.rows();
  const Eigen::Index p2 = m.cols();
  if (factor2_inv.rows() != p2) throw InvalidInput("rho_log_target: factor2_inv has wrong size");
  const MatrixXd g = m * factor2_inv * m.transpose();
  const double one_minus = 1.0 - rho * rho;
  double trace = g(0, 0);
  if (p1 > 1) {
    double interior = 0.0;
    double off = 0.0;
    for (Eigen::Index j = 1; j + 1 < p1; ++j) interior += g(j, j);
    for (Eigen::Index j = 0; j + 1 < p1; ++j) off += g(j, j + 1) + g(j + 1, j);
    trace = (g(0, 0) + g(p1 - 1, p1 - 1) + (1.0 + rho * rho) * interior - rho * off) / one_minus;
  }
  double value = -0.5 * static_cast<double>((p1 - 1) * p2) * std::log(one_minus) - 0.5 * trace;
  if (prior == RhoPrior::Beta22) value += std::log1p(rho) + std::log1p(-rho);
  return value;
}

double update_rho(const MatrixXd& m, const MatrixXd& factor2_inv, double rho_current, RhoPrior prior,
                  RngStream& rng) {
  if (!(std::abs(rho_current) < 1.0)) throw InvalidInput("update_rho: |rho| must be below 1");
  // Precompute the pieces of tr(Omega1^-1 G) so each evaluation is O(1).
  const Eigen::Index p1 = m.rows();
  const double p2 = static_cast<double>(m.cols());
  const MatrixXd g = m * factor2_inv * m.transpose();
  double ends = g(0, 0);
  double interior = 0.0;
  double off = 0.0;
  if (p1 > 1) {
    ends += g(p1 - 1, p1 - 1);
    for (Eigen::Index j = 1; j + 1 < p1; ++j) interior += g(j, j);
    for (Eigen::Index j = 0; j + 1 < p1; ++j) off += g(j, j + 1) + g(j + 1, j);
  }
  const double det_power = 0.5 * static_cast<double>(p1 - 1) * p2;
  auto log_target = [&](double rho) {
    const double one_minus = 1.0 - rho * rho;
    if (!(one_minus > 0.0)) return kNegInf;
    const double trace = p1 > 1 ? (ends + (1.0 + rho * rho) * interior - rho * off) / one_minus : ends;
    double value = -det_power * std::log(one_minus) - 0.5 * trace;
    if (prior == RhoPrior::Beta22) value += std::log1p(rho) + std::log1p(-rho);
    return value;
  };
  return slice_sample(log_target, -1.0, 1.0, rho_current, rng);
}

MatrixXd sample_wishart(double df, const MatrixXd& scale, RngStream& rng) {
  const Eigen::Index d = scale.rows();
  if (scale.cols() != d || d == 0) throw InvalidInput("sample_wishart: scale must be square");
  if (!(df > static_cast<double>(d) - 1.0)) throw InvalidInput("sample_wishart: df must exceed dim - 1");
  require_symmetric(scale, "wishart scale");
  require_psd(scale, "wishart scale");
  const MatrixXd l = CovStructure::dense(scale).sqrt_factor();
  MatrixXd a = MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    a(i, i) = std::sqrt(2.0 * rng.gamma(0.5 * (df - static_cast<double>(i)), 1.0));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  const MatrixXd la = l * a;
  MatrixXd w = la * la.transpose();
  return 0.5 * (w + w.transpose());
}

MatrixXd sample_inverse_wishart(double df, const MatrixXd& scale, RngStream& rng) {
  const MatrixXd w = sample_wishart(df, spd_inverse(scale), rng);
  MatrixXd out = spd_inverse(w);
  return 0.5 * (out + out.transpose());
}

MatrixXd update_factor_covariance(const MatrixXd& m, const MatrixXd& factor1_inv, double wishart_df,
                                  const MatrixXd& wishart_scale, RngStream& rng) {
  const Eigen::Index p1 = m.rows();
  const Eigen::Index p2 = m.cols();
  if (factor1_inv.rows() != p1 || wishart_scale.rows() != p2) {
    throw InvalidInput("update_factor_covariance: dimension mismatch");
  }
  require_psd(wishart_scale, "wishart_scale");
  MatrixXd post = wishart_scale + m.transpose() * factor1_inv * m;
  post = 0.5 * (post + post.transpose());
  return sample_inverse_wishart(wishart_df + static_cast<double>(p1), post, rng);
}

std::size_t kept_draws(const ChainConfig& config) {
  if (config.thin == 0 || config.iterations <= config.burnin) return 0;
  return (config.iterations - config.burnin + config.thin - 1) / config.thin;
}

namespace {

// Fully-Bayes refresh of one covariance structure given coefficients whose
// prior is N(0, structure). Dense structures get an inverse-Wishart draw,
// AR(1) structures a slice draw of rho, and two-factor Kronecker
// structures refresh each factor given the other.
class HyperUpdater {
 public:
  HyperUpdater(const ChainConfig& config, std::string label) : config_(config), label_(std::move(label)) {}

  std::vector<std::string> rho_names(const CovStructure& cov) const {
    const std::size_t count = count_ar1(cov);
    std::vector<std::string> names;
    if (count == 1) names.push_back(label_);
    for (std::size_t i = 1; count > 1 && i <= count; ++i) names.push_back(label_ + "_" + std::to_string(i));
    return names;
  }

  void rhos(const CovStructure& cov, std::vector<double>& out) const {
    if (const auto* a = std::get_if<Ar1>(&cov.kind())) {
      out.push_back(a->rho);
    } else if (const auto* k = std::get_if<Kronecker>(&cov.kind())) {
      for (const auto& f : k->factors) rhos(f, out);
    }
  }

  CovStructure refresh(const CovStructure& cov, const VectorXd& coeffs, RngStream& rng) const {
    const auto p = static_cast<Eigen::Index>(cov.dim());
    if (const auto* k = std::get_if<Kronecker>(&cov.kind())) {
      if (k->factors.size() != 2) {
        throw InvalidInput("fully_bayes: Kronecker structures must have exactly two factors");
      }
      // kron(F_a, F_b): rows of M are indexed by F_b, columns by F_a.
      CovStructure fa = k->factors[0];
      CovStructure fb = k->factors[1];
      const auto pb = static_cast<Eigen::Index>(fb.dim());
      const auto pa = static_cast<Eigen::Index>(fa.dim());
      const MatrixXd m = Eigen::Map<const MatrixXd>(coeffs.data(), pb, pa);
      fb = refresh_factor(fb, m, fa.inverse(), rng);
      fa = refresh_factor(fa, m.transpose(), fb.inverse(), rng);
      return CovStructure::kronecker({fa, fb});
    }
    const MatrixXd m = Eigen::Map<const MatrixXd>(coeffs.data(), p, 1);
    return refresh_factor(cov, m, MatrixXd::Identity(1, 1), rng);
  }

 private:
  static std::size_t count_ar1(const CovStructure& cov) {
    if (cov.is_ar1()) return 1;
    std::size_t n = 0;
    if (const auto* k = std::get_if<Kronecker>(&cov.kind())) {
      for (const auto& f : k->factors) n += count_ar1(f);
    }
    return n;
  }

  // `rows` has one row per dimension of `factor`.
  CovStructure refresh_factor(const CovStructure& factor, const MatrixXd& rows, const MatrixXd& other_inv,
                              RngStream& rng) const {
    if (const auto* a = std::get_if<Ar1>(&factor.kind())) {
      const double rho = update_rho(rows, other_inv, a->rho, config_.rho_prior, rng);
      return CovStructure::ar1(rho, a->dim);
    }
    if (factor.is_dense()) {
      const auto d = static_cast<Eigen::Index>(factor.dim());
      MatrixXd scale = MatrixXd::Identity(d, d);
      if (config_.wishart_scale) {
        if (config_.wishart_scale->rows() != d) {
          throw InvalidInput("fully_bayes: wishart_scale does not match a dense factor of size " +
                             std::to_string(d));
        }
        scale = *config_.wishart_scale;
      }
      return CovStructure::dense(
          update_factor_covariance(rows.transpose(), other_inv, config_.wishart_df, scale, rng));
    }
    throw InvalidInput("fully_bayes: nested Kronecker factors are not supported");
  }

  const ChainConfig& config_;
  std::string label_;
};

Partition angle_partition(const Likelihood& likelihood, const ChainConfig& config, RngStream& rng) {
  const auto p = static_cast<std::size_t>(likelihood.p());
  if (config.angle_groups) {
    if (!is_partition(*config.angle_groups, p)) throw InvalidInput("run_chain: angle_groups is not a partition");
    return *config.angle_groups;
  }
  switch (config.angle_mode) {
    case AngleMode::Single: {
      Partition one(1);
      for (std::size_t j = 0; j < p; ++j) one[0].push_back(j);
      return one;
    }
    case AngleMode::All: {
      Partition all;
      for (std::size_t j = 0; j < p; ++j) all.push_back({j});
      return all;
    }
    case AngleMode::Auto:
      break;
  }
  return partition_design(likelihood.x(), rng);
}

}  // namespace

ChainOutput run_chain(const Likelihood& likelihood, const PriorSpec& prior, const CovStructure& omega,
                      const ChainConfig& config) {
  const Eigen::Index p = likelihood.p();
  const bool intercept = likelihood.has_intercept();
  if (static_cast<Eigen::Index>(omega.dim()) != p) {
    throw InvalidInput("run_chain: Omega has dimension " + std::to_string(omega.dim()) + " but X has " +
                       std::to_string(p) + " columns");
  }
  if (config.thin == 0) throw InvalidInput("run_chain: thin must be at least 1");
  if (!(config.nu > 0.0)) throw InvalidInput("run_chain: nu must be positive");
  const bool normal_scale = prior.is_normal_scale();
  if (normal_scale && static_cast<Eigen::Index>(prior.psi().dim()) != p) {
    throw InvalidInput("run_chain: Psi has wrong dimension");
  }
  const bool fully_bayes = config.hyper_mode == HyperMode::FullyBayes;
  const bool block = normal_scale && config.spn_sampler == SpnSampler::Block;

  RngStream rng(config.seed);
  RngStream partition_rng = rng.substream(1);
  const Partition groups = angle_partition(likelihood, config, partition_rng);

  PriorSpec prior_state = prior;
  CovStructure omega_state = omega;
  MatrixXd omega_inv = omega_state.inverse();
  MatrixXd psi_inv = normal_scale ? prior_state.psi().inverse() : MatrixXd();

  GibbsState state = GibbsState::initial(static_cast<std::size_t>(p), groups.size(), prior);
  if (likelihood.is_logistic() && intercept) {
    state.gamma_intercept = empirical_logit(likelihood.y().mean(), static_cast<double>(likelihood.n()));
  }
  ScaleTarget target(omega_inv, prior_state, state.delta);

  const HyperUpdater omega_updater(config, "rho_omega");
  const HyperUpdater psi_updater(config, "rho_psi");

  ChainOutput out;
  for (Eigen::Index j = 0; j < p; ++j) out.names.push_back("beta_" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < p; ++j) out.names.push_back("s_" + std::to_string(j + 1));
  if (intercept) out.names.push_back("gamma");
  std::size_t n_rho_omega = 0;
  std::size_t n_rho_psi = 0;
  if (fully_bayes) {
    for (auto& n : omega_updater.rho_names(omega_state)) out.names.push_back(n), ++n_rho_omega;
    if (normal_scale) {
      for (auto& n : psi_updater.rho_names(prior_state.psi())) out.names.push_back(n), ++n_rho_psi;
    }
  }
  const std::size_t n_keep = kept_draws(config);
  out.draws.resize(static_cast<Eigen::Index>(n_keep), static_cast<Eigen::Index>(out.names.size()));
  out.warnings = {{"cd_fallback", 0}, {"v_clamped", 0}, {"jitter", 0}};

  const QuadraticForm gaussian_q =
      likelihood.is_logistic() ? QuadraticForm{} : likelihood.quadratic();
  const VectorXd ones = VectorXd::Ones(p);

  std::size_t stored = 0;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    try {
      const QuadraticForm q = likelihood.is_logistic() ? update_logistic_latents(state, likelihood, rng)
                                                       : gaussian_q;
      if (block) {
        out.warnings["jitter"] += spn_block_gibbs(state, q, omega_inv, psi_inv, intercept, rng);
      } else {
        out.warnings["jitter"] += update_coefficients(state, q, omega_inv, intercept, rng);
        VectorXd start = ones;
        if (normal_scale && rng.uniform() < 0.5) start = -ones;
        ModeResult mode = tune_m_coordinate_descent(target, state.beta, config.cd_max_iter, config.cd_tol,
                                                    std::move(start));
        ScaleResult scale = tune_v(target, mode.m, state.beta);
        out.warnings["cd_fallback"] += mode.fallbacks;
        out.warnings["v_clamped"] += scale.clamped;
        const EssTuning tuning{std::move(mode.m), std::move(scale.v), config.nu, groups};
        ess_update_s(state, target, tuning, rng);
        state.z = state.beta.cwiseQuotient(state.s);
        state.beta = state.s.cwiseProduct(state.z);
        if (prior.family() == Family::SPB) {
          const double alpha = prior.alpha();
          for (Eigen::Index j = 0; j < p; ++j) {
            state.xi(j) = tilted_stable_xi_from_s2(state.s(j) * state.s(j), alpha);
            state.delta(j) = sample_delta_conditional(state.xi(j), alpha, state.delta(j), rng);
          }
          target.set_delta(state.delta);
        }
      }
      if (fully_bayes) {
        omega_state = omega_updater.refresh(omega_state, state.z, rng);
        omega_inv = omega_state.inverse();
        target.set_omega_inv(omega_inv);
        if (normal_scale) {
          prior_state.set_psi(psi_updater.refresh(prior_state.psi(), state.s, rng));
          psi_inv = prior_state.psi().inverse();
          target.set_psi_inv(psi_inv);
        }
      }
    } catch (const std::exception& e) {
      out.partial = true;
      out.error = e.what();
      break;
    }
    out.sweeps_completed = it + 1;

    if (it >= config.burnin && (it - config.burnin) % config.thin == 0) {
      auto row = out.draws.row(static_cast<Eigen::Index>(stored));
      row.head(p) = state.beta;
      row.segment(p, p) = state.s;
      Eigen::Index col = 2 * p;
      if (intercept) row(col++) = state.gamma_intercept;
      if (fully_bayes) {
        std::vector<double> values;
        omega_updater.rhos(omega_state, values);
        for (std::size_t i = 0; i < n_rho_omega; ++i) row(col++) = values[i];
        values.clear();
        if (normal_scale) psi_updater.rhos(prior_state.psi(), values);
        for (std::size_t i = 0; i < n_rho_psi; ++i) row(col++) = values[i];
      }
      ++stored;
    }
    if (config.progress) config.progress(it + 1, config.iterations);
  }
  if (stored < n_keep) out.draws.conservativeResize(static_cast<Eigen::Index>(stored), Eigen::NoChange);
  out.summarize();
  return out;
}

}  // namespace shp
