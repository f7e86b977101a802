#include "shp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shp/errors.hpp"

namespace shp {

EssResult effective_sample_size(const VectorXd& chain) {
  const Eigen::Index n = chain.size();
  if (n < 10) throw InvalidInput("effective_sample_size: need at least 10 values");
  const VectorXd centered = chain.array() - chain.mean();
  const double gamma0 = centered.squaredNorm() / static_cast<double>(n);
  if (!(gamma0 > 0.0)) return {0.0, true};

  auto autocov = [&](Eigen::Index lag) {
    return centered.head(n - lag).dot(centered.tail(n - lag)) / static_cast<double>(n);
  };
  // Pair sums Gamma_k = gamma_{2k} + gamma_{2k+1}, kept while positive and
  // forced to be non-increasing.
  double sum_pairs = 0.0;
  double previous = HUGE_VAL;
  for (Eigen::Index k = 0; 2 * k + 1 < n; ++k) {
    const double g0 = k == 0 ? gamma0 : autocov(2 * k);
    double pair = g0 + autocov(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, previous);
    sum_pairs += pair;
    previous = pair;
  }
  const double tau = (-gamma0 + 2.0 * sum_pairs) / gamma0;
  const double ess = static_cast<double>(n) / std::max(tau, 1e-12);
  return {std::min(ess, static_cast<double>(n)), false};
}

double sample_quantile(const VectorXd& x, double prob) {
  if (x.size() == 0) throw InvalidInput("sample_quantile: empty input");
  std::vector<double> v(x.data(), x.data() + x.size());
  std::sort(v.begin(), v.end());
  const double pos = prob * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

ParamSummary summarize_column(const VectorXd& column) {
  ParamSummary s;
  const Eigen::Index n = column.size();
  if (n == 0) return s;
  s.mean = column.mean();
  s.sd = n > 1 ? std::sqrt((column.array() - s.mean).square().sum() / static_cast<double>(n - 1)) : 0.0;
  s.median = sample_quantile(column, 0.5);
  s.q025 = sample_quantile(column, 0.025);
  s.q975 = sample_quantile(column, 0.975);
  if (n >= 10) {
    const EssResult e = effective_sample_size(column);
    s.ess = e.value;
    s.ess_constant = e.constant;
  }
  return s;
}

void ChainOutput::summarize() {
  summary.clear();
  ess.resize(draws.cols());
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    summary.push_back(summarize_column(draws.col(j)));
    ess(j) = summary.back().ess;
  }
}

Eigen::Index ChainOutput::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidInput("ChainOutput: no column named " + name);
  return std::distance(names.begin(), it);
}

RocCurve roc_curve(const VectorXd& y_true, const VectorXd& y_score) {
  if (y_true.size() != y_score.size() || y_true.size() == 0) {
    throw InvalidInput("roc_curve: label and score vectors must be non-empty and equal length");
  }
  const Eigen::Index n = y_true.size();
  double positives = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y_true(i) != 0.0 && y_true(i) != 1.0) throw InvalidInput("roc_curve: labels must be 0/1");
    positives += y_true(i);
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) throw InvalidInput("roc_curve: y_true has a single class");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return y_score(a) > y_score(b); });
  RocCurve roc;
  roc.points.emplace_back(0.0, 0.0);
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double score = y_score(order[i]);
    // Tied scores move the curve in one step.
    while (i < order.size() && y_score(order[i]) == score) {
      if (y_true(order[i]) == 1.0) {
        tp += 1.0;
      } else {
        fp += 1.0;
      }
      ++i;
    }
    const auto [prev_fpr, prev_tpr] = roc.points.back();
    const double fpr = fp / negatives;
    const double tpr = tp / positives;
    roc.auc += (fpr - prev_fpr) * 0.5 * (tpr + prev_tpr);
    roc.points.emplace_back(fpr, tpr);
  }
  return roc;
}

double misclassification_rate(const VectorXd& y_true, const VectorXd& y_score, double cutoff) {
  if (y_true.size() != y_score.size() || y_true.size() == 0) {
    throw InvalidInput("misclassification_rate: label and score vectors must be non-empty and equal length");
  }
  double wrong = 0.0;
  for (Eigen::Index i = 0; i < y_true.size(); ++i) {
    const bool predicted = y_score(i) >= cutoff;
    if (predicted != (y_true(i) == 1.0)) wrong += 1.0;
  }
  return wrong / static_cast<double>(y_true.size());
}

}  // namespace shp
