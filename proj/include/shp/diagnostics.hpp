#ifndef SHP_DIAGNOSTICS_HPP
#define SHP_DIAGNOSTICS_HPP

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace shp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct EssResult {
  double value = 0.0;
  bool constant = false;  ///< chain had zero variance; value reported as 0
};

/// N / (1 + 2 sum rho_t) with Geyer's initial monotone positive sequence
/// truncation. Requires at least 10 values. Capped at N.
EssResult effective_sample_size(const VectorXd& chain);

struct ParamSummary {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double ess = 0.0;
  bool ess_constant = false;
};

/// Type-7 (linear interpolation) sample quantile.
double sample_quantile(const VectorXd& x, double prob);

ParamSummary summarize_column(const VectorXd& column);

struct ChainOutput {
  std::vector<std::string> names;
  MatrixXd draws;  ///< kept iterations x parameters
  VectorXd ess;
  std::vector<ParamSummary> summary;
  std::size_t sweeps_completed = 0;
  bool partial = false;
  std::string error;
  std::map<std::string, std::size_t> warnings;

  /// Recompute ess and summary from draws.
  void summarize();
  Eigen::Index column(const std::string& name) const;
};

struct RocCurve {
  std::vector<std::pair<double, double>> points;  ///< (fpr, tpr), starting at (0, 0)
  double auc = 0.0;
};

/// Empirical ROC by threshold sweep over distinct scores; AUC by trapezoid.
RocCurve roc_curve(const VectorXd& y_true, const VectorXd& y_score);

/// Fraction of cases where (score >= cutoff) disagrees with the label.
double misclassification_rate(const VectorXd& y_true, const VectorXd& y_score, double cutoff = 0.5);

}  // namespace shp

#endif  // SHP_DIAGNOSTICS_HPP
