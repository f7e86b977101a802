#include "shp/covariance.hpp"

#include <cmath>
#include <string>

#include "shp/errors.hpp"

namespace shp {

void require_symmetric(const MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw InvalidInput(std::string(what) + ": matrix must be square and non-empty");
  }
  if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InvalidInput(std::string(what) + ": matrix not symmetric");
  }
}

void require_psd(const MatrixXd& m, const char* what) {
  require_symmetric(m, what);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  if (eig.eigenvalues().minCoeff() < -1e-10 * std::max(top, 0.0) || top < 0.0) {
    throw DecompositionError(std::string(what) + ": matrix not positive semi-definite");
  }
}

CovStructure CovStructure::dense(MatrixXd m) {
  require_psd(m, "CovStructure::dense");
  MatrixXd sym = 0.5 * (m + m.transpose());
  return CovStructure(Kind(std::move(sym)));
}

CovStructure CovStructure::ar1(double rho, std::size_t dim) {
  if (!(std::fabs(rho) < 1.0)) throw DomainError("AR(1) correlation must satisfy |rho| < 1");
  if (dim == 0) throw InvalidInput("AR(1) dimension must be positive");
  return CovStructure(Kind(Ar1{rho, dim}));
}

CovStructure CovStructure::kronecker(std::vector<CovStructure> factors) {
  if (factors.empty()) throw InvalidInput("Kronecker structure needs at least one factor");
  return CovStructure(Kind(Kronecker{std::move(factors)}));
}

std::size_t CovStructure::dim() const {
  if (const auto* m = std::get_if<MatrixXd>(&kind_)) return static_cast<std::size_t>(m->rows());
  if (const auto* a = std::get_if<Ar1>(&kind_)) return a->dim;
  std::size_t d = 1;
  for (const auto& f : std::get<Kronecker>(kind_).factors) d *= f.dim();
  return d;
}

MatrixXd ar1_matrix(double rho, std::size_t dim) {
  MatrixXd m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const auto lag = static_cast<double>(i > j ? i - j : j - i);
      m(i, j) = lag == 0.0 ? 1.0 : std::pow(rho, lag);
    }
  }
  return m;
}

MatrixXd ar1_inverse(double rho, std::size_t dim) {
  if (!(std::fabs(rho) < 1.0)) throw DomainError("ar1_inverse: |rho| must be < 1");
  if (dim == 0) throw InvalidInput("ar1_inverse: dimension must be positive");
  MatrixXd inv = MatrixXd::Zero(dim, dim);
  if (dim == 1) {
    inv(0, 0) = 1.0;
    return inv;
  }
  const double k = 1.0 / (1.0 - rho * rho);
  for (std::size_t i = 0; i < dim; ++i) {
    inv(i, i) = (i == 0 || i + 1 == dim) ? k : (1.0 + rho * rho) * k;
    if (i + 1 < dim) {
      inv(i, i + 1) = -rho * k;
      inv(i + 1, i) = -rho * k;
    }
  }
  return inv;
}

MatrixXd kronecker_product(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

MatrixXd CovStructure::materialize() const {
  if (const auto* m = std::get_if<MatrixXd>(&kind_)) return *m;
  if (const auto* a = std::get_if<Ar1>(&kind_)) return ar1_matrix(a->rho, a->dim);
  if (dim() > kDenseMaterializeLimit) {
    throw InvalidInput("Kronecker structure too large to materialize densely");
  }
  const auto& fs = std::get<Kronecker>(kind_).factors;
  MatrixXd out = fs.front().materialize();
  for (std::size_t i = 1; i < fs.size(); ++i) out = kronecker_product(out, fs[i].materialize());
  return out;
}

MatrixXd CovStructure::inverse() const {
  if (const auto* m = std::get_if<MatrixXd>(&kind_)) return spd_inverse(*m);
  if (const auto* a = std::get_if<Ar1>(&kind_)) return ar1_inverse(a->rho, a->dim);
  if (dim() > kDenseMaterializeLimit) {
    throw InvalidInput("Kronecker structure too large to invert densely");
  }
  const auto& fs = std::get<Kronecker>(kind_).factors;
  MatrixXd out = fs.front().inverse();
  for (std::size_t i = 1; i < fs.size(); ++i) out = kronecker_product(out, fs[i].inverse());
  return out;
}

VectorXd CovStructure::multiply(const VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) {
    throw InvalidInput("CovStructure::multiply: dimension mismatch");
  }
  if (const auto* m = std::get_if<MatrixXd>(&kind_)) return (*m) * x;
  if (const auto* a = std::get_if<Ar1>(&kind_)) return ar1_matrix(a->rho, a->dim) * x;
  // (A kron B) vec(X) = vec(B X A'), applied factor by factor from the right.
  const auto& fs = std::get<Kronecker>(kind_).factors;
  VectorXd v = x;
  std::size_t right = 1;
  for (std::size_t k = fs.size(); k-- > 0;) {
    const std::size_t dk = fs[k].dim();
    const std::size_t left = dim() / (dk * right);
    VectorXd out(v.size());
    // v viewed as (right, dk, left) in column-major order.
    for (std::size_t l = 0; l < left; ++l) {
      for (std::size_t r = 0; r < right; ++r) {
        VectorXd fiber(dk);
        for (std::size_t i = 0; i < dk; ++i) fiber(i) = v(r + right * (i + dk * l));
        const VectorXd y = fs[k].multiply(fiber);
        for (std::size_t i = 0; i < dk; ++i) out(r + right * (i + dk * l)) = y(i);
      }
    }
    v = std::move(out);
    right *= dk;
  }
  return v;
}

MatrixXd CovStructure::sqrt_factor() const {
  const MatrixXd m = materialize();
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  const double top = eig.eigenvalues().maxCoeff();
  if (eig.eigenvalues().minCoeff() < -1e-10 * std::max(top, 0.0)) {
    throw DecompositionError("sqrt_factor: matrix not positive semi-definite");
  }
  const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

PsdProjection project_psd_report(const MatrixXd& m) {
  require_symmetric(m, "project_psd");
  const MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  const VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
  PsdProjection out;
  out.active = (eig.eigenvalues().array() < 0.0).any();
  if (!out.active) {
    out.matrix = sym;
    return out;
  }
  out.matrix = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose());
  out.residual = (out.matrix - sym).norm();
  return out;
}

MatrixXd project_psd(const MatrixXd& m) { return project_psd_report(m).matrix; }

MatrixXd spd_inverse(const MatrixXd& m) {
  const auto p = m.rows();
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-8 * std::max(m.trace(), 1e-300) / static_cast<double>(p);
    llt.compute(m + jitter * MatrixXd::Identity(p, p));
    if (llt.info() != Eigen::Success) throw DecompositionError("spd_inverse: matrix not SPD");
  }
  MatrixXd inv = llt.solve(MatrixXd::Identity(p, p));
  return 0.5 * (inv + inv.transpose());
}

double log_det_spd(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw DecompositionError("log_det_spd: matrix not SPD");
  const MatrixXd& l = llt.matrixLLT();
  return 2.0 * l.diagonal().array().log().sum();
}

}  // namespace shp
