#ifndef SHP_LIKELIHOOD_HPP
#define SHP_LIKELIHOOD_HPP

#include <Eigen/Dense>

namespace shp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Conditionally quadratic log-likelihood -1/2 (b'Ab - 2 b'h) in the
/// coefficient vector b = (beta, gamma). gamma is present only when the
/// model has an intercept.
struct QuadraticForm {
  MatrixXd A;
  VectorXd h;
};

class Likelihood {
 public:
  enum class Kind { GaussianLinear, Logistic };

  static Likelihood gaussian(MatrixXd x, VectorXd y, double phi2, bool intercept = false);
  static Likelihood logistic(MatrixXd x, VectorXd y, bool intercept = false);

  Kind kind() const noexcept { return kind_; }
  bool is_logistic() const noexcept { return kind_ == Kind::Logistic; }
  bool has_intercept() const noexcept { return intercept_; }
  Eigen::Index n() const noexcept { return x_.rows(); }
  Eigen::Index p() const noexcept { return x_.cols(); }
  /// p plus one when an intercept is present.
  Eigen::Index coef_dim() const noexcept { return design_.cols(); }
  double phi2() const noexcept { return phi2_; }

  const MatrixXd& x() const noexcept { return x_; }
  const VectorXd& y() const noexcept { return y_; }
  /// X with a trailing column of ones when an intercept is present.
  const MatrixXd& design() const noexcept { return design_; }

  /// Gaussian: A = X'X / phi2, h = X'y / phi2.
  QuadraticForm quadratic() const;
  /// Logistic given Polya-Gamma latents: A = X'diag(w)X, h = X'(y - 1/2).
  QuadraticForm quadratic(const VectorXd& pg_omega) const;

  /// Negative log-likelihood up to a constant at coefficients b.
  double negative_log_likelihood(const VectorXd& coef) const;

 private:
  Likelihood(Kind k, MatrixXd x, VectorXd y, double phi2, bool intercept);
  Kind kind_;
  MatrixXd x_;
  VectorXd y_;
  double phi2_;
  bool intercept_;
  MatrixXd design_;
};

}  // namespace shp

#endif  // SHP_LIKELIHOOD_HPP
