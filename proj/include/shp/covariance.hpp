#ifndef SHP_COVARIANCE_HPP
#define SHP_COVARIANCE_HPP

#include <Eigen/Dense>
#include <cstddef>
#include <variant>
#include <vector>

namespace shp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Structures larger than this are never materialized densely; products
/// go through the factorized Kronecker path instead.
inline constexpr std::size_t kDenseMaterializeLimit = 4096;

class CovStructure;

struct Ar1 {
  double rho;
  std::size_t dim;
};

struct Kronecker {
  /// kron(factors[0], factors[1], ...): the last factor varies fastest,
  /// so vec(B) of a p1 x p2 matrix B pairs with {Omega2, Omega1}.
  std::vector<CovStructure> factors;
};

/// Structured covariance: dense PSD, AR(1) correlation, or a Kronecker
/// product of structured factors.
class CovStructure {
 public:
  using Kind = std::variant<MatrixXd, Ar1, Kronecker>;

  static CovStructure dense(MatrixXd m);
  static CovStructure ar1(double rho, std::size_t dim);
  static CovStructure identity(std::size_t dim) { return dense(MatrixXd::Identity(dim, dim)); }
  static CovStructure kronecker(std::vector<CovStructure> factors);

  std::size_t dim() const;
  const Kind& kind() const noexcept { return kind_; }
  bool is_dense() const { return std::holds_alternative<MatrixXd>(kind_); }
  bool is_ar1() const { return std::holds_alternative<Ar1>(kind_); }
  bool is_kronecker() const { return std::holds_alternative<Kronecker>(kind_); }

  MatrixXd materialize() const;
  MatrixXd inverse() const;
  /// Sigma * x without materializing Kronecker structures.
  VectorXd multiply(const VectorXd& x) const;
  /// A square root L with L L' = Sigma (eigen-based; PSD inputs allowed).
  MatrixXd sqrt_factor() const;

 private:
  explicit CovStructure(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

MatrixXd ar1_matrix(double rho, std::size_t dim);

/// Closed-form tridiagonal inverse of the AR(1) correlation matrix.
MatrixXd ar1_inverse(double rho, std::size_t dim);

MatrixXd kronecker_product(const MatrixXd& a, const MatrixXd& b);

struct PsdProjection {
  MatrixXd matrix;
  double residual = 0.0;  ///< Frobenius distance to the input
  bool active = false;    ///< true if any eigenvalue was clamped
};

/// Frobenius-nearest PSD matrix: eigenvalues clamped at zero.
PsdProjection project_psd_report(const MatrixXd& m);
MatrixXd project_psd(const MatrixXd& m);

/// Throws InvalidInput unless m is square and symmetric to 1e-10 relative.
void require_symmetric(const MatrixXd& m, const char* what);

/// Throws DecompositionError if the smallest eigenvalue is below
/// -1e-10 * largest.
void require_psd(const MatrixXd& m, const char* what);

/// Cholesky-based inverse of an SPD matrix; adds 1e-8 * trace / p jitter
/// once on failure.
MatrixXd spd_inverse(const MatrixXd& m);

double log_det_spd(const MatrixXd& m);

}  // namespace shp

#endif  // SHP_COVARIANCE_HPP
