#include "shp/likelihood.hpp"

#include <cmath>
#include <string>

#include "shp/errors.hpp"

namespace shp {

Likelihood::Likelihood(Kind k, MatrixXd x, VectorXd y, double phi2, bool intercept)
    : kind_(k), x_(std::move(x)), y_(std::move(y)), phi2_(phi2), intercept_(intercept) {
  if (x_.rows() < 1 || x_.cols() < 1) throw InvalidInput("likelihood: X must be non-empty");
  if (y_.size() != x_.rows()) throw InvalidInput("likelihood: X and y row counts differ");
  if (!x_.allFinite() || !y_.allFinite()) throw InvalidInput("likelihood: non-finite data");
  design_.resize(x_.rows(), x_.cols() + (intercept_ ? 1 : 0));
  design_.leftCols(x_.cols()) = x_;
  if (intercept_) design_.col(x_.cols()).setOnes();
}

Likelihood Likelihood::gaussian(MatrixXd x, VectorXd y, double phi2, bool intercept) {
  if (!(phi2 > 0.0) || !std::isfinite(phi2)) throw InvalidInput("likelihood: phi2 must be positive");
  return Likelihood(Kind::GaussianLinear, std::move(x), std::move(y), phi2, intercept);
}

Likelihood Likelihood::logistic(MatrixXd x, VectorXd y, bool intercept) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) {
      throw InvalidInput("logistic likelihood: y[" + std::to_string(i) + "] is not 0 or 1");
    }
  }
  return Likelihood(Kind::Logistic, std::move(x), std::move(y), 1.0, intercept);
}

QuadraticForm Likelihood::quadratic() const {
  if (kind_ != Kind::GaussianLinear) throw InvalidInput("quadratic(): logistic needs latents");
  return {design_.transpose() * design_ / phi2_, design_.transpose() * y_ / phi2_};
}

QuadraticForm Likelihood::quadratic(const VectorXd& pg_omega) const {
  if (kind_ != Kind::Logistic) return quadratic();
  if (pg_omega.size() != n()) throw InvalidInput("quadratic(): latent vector has wrong length");
  const MatrixXd weighted = pg_omega.asDiagonal() * design_;
  return {design_.transpose() * weighted, design_.transpose() * (y_.array() - 0.5).matrix()};
}

double Likelihood::negative_log_likelihood(const VectorXd& coef) const {
  const VectorXd eta = design_ * coef;
  if (kind_ == Kind::GaussianLinear) return 0.5 * (y_ - eta).squaredNorm() / phi2_;
  double total = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta(i);
    // log(1 + exp(e)) without overflow.
    const double softplus = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    total += softplus - y_(i) * e;
  }
  return total;
}

}  // namespace shp
