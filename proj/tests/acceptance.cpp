// Acceptance checks 1-12. Prints one PASS/FAIL line per criterion; exits
// nonzero if any criterion fails.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chains.hpp"
#include "oracles.hpp"
#include "shp/diagnostics.hpp"
#include "shp/estimation.hpp"
#include "shp/prior.hpp"
#include "shp/sampler.hpp"
#include "support.hpp"

#ifndef SHP_CLI_PATH
#define SHP_CLI_PATH ""
#endif

using namespace shp;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// Collects sub-check outcomes; the criterion passes when all do.
class Report {
 public:
  void check(bool ok, const std::string& what) {
    ok_ = ok_ && ok;
    if (!ok) failed_.push_back(what);
    ++count_;
  }
  void note(const std::string& text) { notes_.push_back(text); }
  bool ok() const { return ok_; }
  std::string summary() const {
    std::ostringstream out;
    out << (count_ - failed_.size()) << "/" << count_ << " checks";
    for (const auto& n : notes_) out << "; " << n;
    for (const auto& f : failed_) out << "; failed: " << f;
    return out.str();
  }

 private:
  bool ok_ = true;
  std::size_t count_ = 0;
  std::vector<std::string> failed_;
  std::vector<std::string> notes_;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, RngStream& rng) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

double soft_threshold(double b, double t) { return std::copysign(std::max(std::abs(b) - t, 0.0), b); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

EmConfig em_config(std::size_t draws, std::uint64_t seed) {
  EmConfig c;
  c.draws_per_step = draws;
  c.max_iter = 100;
  c.tol = 1e-8;
  c.seed = seed;
  return c;
}

// 1. Analytic constants.
void analytic_constants(Report& r) {
  const double mc = max_correlation(PriorSpec::sng(1.0));
  r.check(std::abs(mc - kPi / 4) < 1e-12, "max_correlation(SNG c=1) = pi/4");
  const PriorSpec near2 = PriorSpec::spb(2.0 - 1e-12);
  r.check(std::abs(max_correlation(near2) - 1.0) < 1e-9, "max_correlation(SPB q->2) = 1");
  r.check(std::abs(kurtosis(near2) - 3.0) < 1e-9, "kurtosis(SPB q->2) = 3");
  r.note("pi/4 error " + fmt(std::abs(mc - kPi / 4), 2));
}

// 2. Scale second moment and marginal kurtosis for the eight shape settings.
void moments(Report& r) {
  const std::size_t n = 1000000;
  std::vector<std::pair<PriorSpec, std::string>> settings;
  for (double c : {0.3, 0.5, 1.0, 10.0}) settings.emplace_back(PriorSpec::sng(c), "SNG c=" + fmt(c));
  for (double q : {0.65, 0.78, 1.0, 1.75}) settings.emplace_back(PriorSpec::spb(q), "SPB q=" + fmt(q));
  std::uint64_t seed = 200;
  for (const auto& [prior, label] : settings) {
    RngStream rs(seed++);
    const MatrixXd s = simulate_scales(prior, 1, n, rs);
    const double es2 = s.col(0).array().square().mean();
    RngStream rb(seed++);
    const VectorXd beta = simulate_prior(prior, CovStructure::identity(1), n, rb).col(0);
    const double k_hat = test::sample_kurtosis(beta);
    const double k = kurtosis(prior);
    const bool heavy = (prior.family() == Family::SNG && prior.c() == 0.3) ||
                       (prior.family() == Family::SPB && prior.q() == 0.65);
    const double tol = heavy ? 0.10 : 0.05;
    r.check(es2 >= 0.99 && es2 <= 1.01, label + " E[s^2]=" + fmt(es2, 5));
    r.check(std::abs(k_hat / k - 1.0) < tol, label + " kurtosis " + fmt(k_hat) + " vs " + fmt(k));
    r.note(label + ": E[s^2] " + fmt(es2, 5) + ", kurtosis " + fmt(k_hat) + "/" + fmt(k));
  }
}

// 3. Marginal invariance under AR1 Omega.
void marginal_invariance(Report& r) {
  const std::size_t n = 1000000;
  RngStream rng(300);
  const MatrixXd draws = simulate_prior(PriorSpec::sng(1.0), CovStructure::ar1(0.5, 4), n, rng);
  const double d = test::ks_statistic(draws.col(0), test::laplace_cdf);
  const double crit = test::kKs001 / std::sqrt(static_cast<double>(n));
  r.check(d < crit, "KS vs Laplace");
  r.note("D=" + fmt(d) + " critical " + fmt(crit));
}

// 4. SNG c=1 and SPB q=1 give the same margins.
void family_equivalence(Report& r) {
  const std::size_t n = 100000;
  const CovStructure omega = CovStructure::ar1(0.5, 3);
  RngStream r1(400);
  RngStream r2(401);
  const VectorXd a = simulate_prior(PriorSpec::sng(1.0), omega, n, r1).col(0);
  const VectorXd b = simulate_prior(PriorSpec::spb(1.0), omega, n, r2).col(0);
  const double d = test::ks_two_sample(a, b);
  const double crit = test::ks_two_sample_critical(n, n);
  r.check(d < crit, "two-sample KS");
  r.note("D=" + fmt(d) + " critical " + fmt(crit));
}

// 5. Successive-conditional checks and the GIG oracle.
void sampler_correctness(Report& r) {
  const CovStructure omega = CovStructure::ar1(0.5, 3);
  const std::vector<std::pair<PriorSpec, std::string>> priors{
      {PriorSpec::sng(1.0), "SNG c=1"}, {PriorSpec::spb(0.78), "SPB q=0.78"}, {PriorSpec::spn(CovStructure::ar1(0.3, 3)), "SPN"}};
  const char* stat[] = {"E[s]", "E[s^2]", "E[beta^2]"};
  std::uint64_t seed = 500;
  for (const auto& [prior, label] : priors) {
    const test::GewekeResult g = test::geweke_successive(prior, omega, 100000, seed++);
    std::string zs;
    for (int k = 0; k < 3; ++k) {
      r.check(std::abs(g.z[k]) < 4.0, label + " " + stat[k] + " z=" + fmt(g.z[k], 3));
      zs += (k ? "," : "") + fmt(g.z[k], 2);
    }
    r.note(label + " z=(" + zs + ")");
  }

  const ScaleTarget target(MatrixXd::Identity(1, 1), PriorSpec::sng(1.0));
  GibbsState state = GibbsState::initial(1, 1, PriorSpec::sng(1.0));
  state.beta = VectorXd::Ones(1);
  const ModeResult mode = tune_m_coordinate_descent(target, state.beta, 10, 1e-10);
  const ScaleResult sc = tune_v(target, mode.m, state.beta);
  const EssTuning tuning{mode.m, sc.v, 1.0, Partition{{0}}};
  RngStream rng(510);
  const int kept = 20000;
  VectorXd draws(kept);
  for (int i = 0; i < kept * 10; ++i) {
    ess_update_s(state, target, tuning, rng);
    if (i % 10 == 9) draws(i / 10) = state.s(0);
  }
  const double d = test::ks_statistic(draws, test::GigCdf());
  const double crit = test::kKs001 / std::sqrt(static_cast<double>(kept));
  r.check(d < crit, "GIG KS");
  r.note("GIG D=" + fmt(d) + " critical " + fmt(crit));
}

// 6. SPN block Gibbs against the generic elliptical-slice SPN sampler.
void cross_sampler(Report& r) {
  RngStream data(600);
  const MatrixXd x = random_matrix(20, 2, data);
  VectorXd truth(2);
  truth << 1.0, -0.5;
  const VectorXd y = x * truth + random_matrix(20, 1, data);
  const Likelihood lik = Likelihood::gaussian(x, y, 1.0);
  const PriorSpec prior = PriorSpec::spn(CovStructure::ar1(0.3, 2));
  const CovStructure omega = CovStructure::ar1(0.5, 2);

  ChainConfig cfg;
  cfg.iterations = 200000;
  cfg.burnin = 2000;
  cfg.seed = 601;
  cfg.spn_sampler = SpnSampler::Block;
  const ChainOutput block = run_chain(lik, prior, omega, cfg);
  cfg.seed = 602;
  cfg.spn_sampler = SpnSampler::Ess;
  const ChainOutput ess = run_chain(lik, prior, omega, cfg);
  r.check(!block.partial && !ess.partial, "chains complete");
  for (Eigen::Index j = 0; j < 2; ++j) {
    const VectorXd a = block.draws.col(j);
    const VectorXd b = ess.draws.col(j);
    const double se = std::hypot(test::batch_means_se(a, 100), test::batch_means_se(b, 100));
    const double diff = std::abs(a.mean() - b.mean());
    r.check(diff < 4 * se, "beta_" + std::to_string(j + 1));
    r.note("beta_" + std::to_string(j + 1) + " " + fmt(a.mean()) + " vs " + fmt(b.mean()) + " (" + fmt(diff / se, 3) +
           " SE)");
  }
}

// 7. Soft thresholding and the ridge limit.
void mode_oracle(Report& r) {
  const double phi2 = 0.1;
  const double t = std::sqrt(2.0) * phi2;
  const std::vector<double> grid{-1.0, -0.6, -0.3, -0.1, 0.0, 0.05, 0.3, 0.6, 1.0};
  const auto p = static_cast<Eigen::Index>(grid.size());
  VectorXd ols(p);
  for (Eigen::Index j = 0; j < p; ++j) ols(j) = grid[static_cast<std::size_t>(j)];
  const EmResult m = em_posterior_mode(Likelihood::gaussian(MatrixXd::Identity(p, p), ols, phi2), PriorSpec::sng(1.0),
                                       CovStructure::identity(static_cast<std::size_t>(p)), em_config(10000, 700));
  double worst = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double err = std::abs(m.beta(j) - soft_threshold(ols(j), t));
    worst = std::max(worst, err);
    r.check(err < 1e-2, "soft threshold at " + fmt(ols(j)) + " error " + fmt(err, 3));
  }
  r.note("soft-threshold max error " + fmt(worst, 3));

  RngStream rng(701);
  const MatrixXd x = random_matrix(30, 5, rng);
  const VectorXd y = random_matrix(30, 1, rng);
  const CovStructure omega = CovStructure::ar1(0.6, 5);
  const double phi2r = 0.7;
  const EmResult rm = em_posterior_mode(Likelihood::gaussian(x, y, phi2r), PriorSpec::sng(1e6), omega, em_config(1000, 702));
  const VectorXd ridge = (x.transpose() * x / phi2r + omega.inverse()).ldlt().solve(x.transpose() * y / phi2r);
  const double rerr = (rm.beta - ridge).cwiseAbs().maxCoeff();
  r.check(rerr < 1e-3, "ridge limit error " + fmt(rerr, 3));
  r.note("ridge max error " + fmt(rerr, 3));
}

// 8. Bivariate thresholding surface.
void threshold_surface(Report& r) {
  const double phi2 = 0.1;
  const std::vector<double> ols2{-0.5, 0.0, 0.5, 1.0};
  std::vector<double> ols1;
  for (int i = -5; i <= 10; ++i) ols1.push_back(0.1 * i);
  const auto n1 = ols1.size();

  // beta1 at (ols1[i], ols2[k]) is element k * n1 + i.
  auto surface = [&](double c, std::uint64_t seed) {
    const PriorSpec prior = PriorSpec::sng(c);
    const CovStructure omega = CovStructure::dense(omega_for_marginal_correlation(prior, 0.5));
    return bivariate_threshold_surface(prior, omega, phi2, ols2, ols1, em_config(10000, seed));
  };

  // Structure can discourage sparsity in beta1 for some ols2, so the zero
  // region is required somewhere on each surface, not in every panel.
  for (double c : {0.5, 1.0}) {
    const auto s = surface(c, 800 + static_cast<std::uint64_t>(c * 10));
    double best = HUGE_VAL;
    std::string panels;
    for (std::size_t k = 0; k < ols2.size(); ++k) {
      double smallest = HUGE_VAL;
      for (std::size_t i = 0; i < n1; ++i) {
        if (std::abs(ols1[i]) > 0.3 + 1e-9) continue;
        smallest = std::min(smallest, std::abs(s[k * n1 + i].beta1));
      }
      best = std::min(best, smallest);
      panels += (k ? " " : "") + fmt(smallest, 2);
    }
    r.check(best < kSparsityThreshold, "c=" + fmt(c) + " zero region (min |beta1| " + fmt(best, 3) + ")");
    r.note("c=" + fmt(c) + " min |beta1| by ols2 panel: " + panels);
  }

  // Borrowing, with the Monte Carlo error pooled from two replicate surfaces.
  const auto a = surface(1.0, 810);
  const auto b = surface(1.0, 811);
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += std::pow(a[i].beta1 - b[i].beta1, 2);
  const double sigma = std::sqrt(ss / (2.0 * static_cast<double>(a.size())));
  const std::size_t hi = 3 * n1;
  const std::size_t lo = 0;
  int violations = 0;
  for (std::size_t i = 0; i < n1; ++i) {
    if (ols1[i] < -1e-9) continue;
    const double up = 0.5 * (a[hi + i].beta1 + b[hi + i].beta1);
    const double down = 0.5 * (a[lo + i].beta1 + b[lo + i].beta1);
    // Each side averages two runs, so the difference has standard error sigma.
    if (up < down - 2 * sigma) {
      ++violations;
      r.check(false, "borrowing at ols1=" + fmt(ols1[i]) + ": " + fmt(up) + " < " + fmt(down));
    }
  }
  r.check(violations == 0, "monotone borrowing on [0, 1]");
  r.note("borrowing MC SE " + fmt(sigma, 3));
}

// 9. Coordinate descent.
void coordinate_descent(Report& r) {
  const ScaleTarget target(MatrixXd::Identity(1, 1), PriorSpec::sng(1.0));
  const ModeResult m = tune_m_coordinate_descent(target, VectorXd::Ones(1), 10, 1e-12);
  const double err = std::abs(m.m(0) - std::pow(2.0, -0.25));
  r.check(err < 1e-6, "stationary point 2^(-1/4)");

  RngStream rng(900);
  double worst = 0.0;
  int solved = 0;
  for (int i = 0; i < 1000; ++i) {
    const Family f = i % 3 == 0 ? Family::SNG : (i % 3 == 1 ? Family::SPN : Family::SPB);
    const CoordinateKappa k = test::random_kappa(f, rng);
    const auto root = maximize_coordinate(k, f == Family::SPN);
    if (!root) continue;
    ++solved;
    worst = std::max(worst, std::abs(k.stationarity(*root)));
  }
  r.check(worst < 1e-6, "polynomial residual");
  r.check(solved >= 900, "roots found");

  int confirmed = 0;
  for (int i = 0; i < 100; ++i) {
    const Family f = i % 2 == 0 ? Family::SNG : Family::SPN;
    const bool signed_scale = f == Family::SPN;
    const CoordinateKappa k = test::random_kappa(f, rng);
    const auto root = maximize_coordinate(k, signed_scale);
    if (!root) continue;
    double best = -HUGE_VAL;
    for (double s = 1e-4; s < 10.0; s += 1e-4) {
      best = std::max(best, k.objective(s));
      if (signed_scale) best = std::max(best, k.objective(-s));
    }
    if (k.objective(*root) >= best - 1e-9) ++confirmed;
  }
  r.check(confirmed == 100, "brute-force global maximizer");
  r.note("2^(-1/4) error " + fmt(err, 2) + ", max residual " + fmt(worst, 2) + " over " + std::to_string(solved) +
         ", grid-confirmed " + std::to_string(confirmed) + "/100");
}

// 10. Partition algorithm.
void partition(Report& r) {
  RngStream rng(1000);
  const Partition id = partition_design(MatrixXd::Identity(7, 7), rng);
  r.check(id.size() == 7 && std::all_of(id.begin(), id.end(), [](const auto& g) { return g.size() == 1; }),
          "identity gives singletons");
  const MatrixXd rank1 = random_matrix(25, 1, rng) * VectorXd::Ones(6).transpose();
  const Partition one = partition_design(rank1, rng);
  r.check(one.size() == 1 && one[0].size() == 6, "rank-1 gives one block");
  int valid = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rs(1100 + seed);
    const auto p = static_cast<Eigen::Index>(2 + seed % 15);
    const MatrixXd m = random_matrix(40, p, rs);
    if (is_partition(partition_design(m, rs), static_cast<std::size_t>(p))) ++valid;
  }
  r.check(valid == 100, "random designs give valid partitions");
  r.note(std::to_string(valid) + "/100 valid");
}

// 11. Logistic pipeline.
void logistic_pipeline(Report& r) {
  const std::size_t n = 300;
  const std::size_t n_test = 1000;
  const std::size_t p = 8;
  const CovStructure truth_omega = CovStructure::ar1(0.9, p);
  std::vector<double> auc_struct;
  std::vector<double> auc_diag;
  std::vector<double> auc_oracle;

  auto predict = [](const ChainOutput& out, const MatrixXd& x, std::size_t p) {
    const MatrixXd beta = out.draws.leftCols(static_cast<Eigen::Index>(p));
    const Eigen::Index g = out.column("gamma");
    VectorXd prob = VectorXd::Zero(x.rows());
    for (Eigen::Index d = 0; d < beta.rows(); ++d) {
      const VectorXd eta = (x * beta.row(d).transpose()).array() + out.draws(d, g);
      prob += (1.0 + (-eta.array()).exp()).inverse().matrix();
    }
    return VectorXd(prob / static_cast<double>(beta.rows()));
  };

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(1200 + seed);
    const VectorXd beta = simulate_prior(PriorSpec::sng(1.0), truth_omega, 1, rng).row(0).transpose();
    auto draw = [&](std::size_t rows, MatrixXd& x, VectorXd& y) {
      x = random_matrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p), rng);
      y.resize(x.rows());
      const VectorXd eta = x * beta;
      for (Eigen::Index i = 0; i < x.rows(); ++i) y(i) = rng.uniform() < 1.0 / (1.0 + std::exp(-eta(i))) ? 1.0 : 0.0;
    };
    MatrixXd x;
    VectorXd y;
    MatrixXd xt;
    VectorXd yt;
    draw(n, x, y);
    draw(n_test, xt, yt);
    const Likelihood lik = Likelihood::logistic(x, y, true);

    ChainConfig cfg;
    cfg.iterations = 3000;
    cfg.burnin = 1000;
    cfg.thin = 2;
    cfg.seed = 1300 + seed;
    cfg.hyper_mode = HyperMode::FullyBayes;
    const ChainOutput s = run_chain(lik, PriorSpec::sng(1.0), CovStructure::ar1(0.0, p), cfg);
    cfg.hyper_mode = HyperMode::Fixed;
    const ChainOutput d = run_chain(lik, PriorSpec::sng(1.0), CovStructure::identity(p), cfg);
    r.check(!s.partial && !d.partial, "seed " + std::to_string(seed) + " chains complete");
    auc_struct.push_back(roc_curve(yt, predict(s, xt, p)).auc);
    auc_diag.push_back(roc_curve(yt, predict(d, xt, p)).auc);
    auc_oracle.push_back(roc_curve(yt, xt * beta).auc);
  }
  const double min_struct = *std::min_element(auc_struct.begin(), auc_struct.end());
  const double min_diag = *std::min_element(auc_diag.begin(), auc_diag.end());
  const double ms = median(auc_struct);
  const double md = median(auc_diag);
  r.check(ms > 0.7 && md > 0.7, "median AUC > 0.7");
  // A seed whose true-beta AUC is below 0.7 cannot reach 0.7 with any estimator.
  std::string low;
  for (std::size_t i = 0; i < auc_oracle.size(); ++i) {
    if (std::min(auc_struct[i], auc_diag[i]) > 0.7) continue;
    low += " " + std::to_string(i) + ":" + fmt(auc_struct[i]) + "/" + fmt(auc_oracle[i]);
    r.check(auc_oracle[i] - std::min(auc_struct[i], auc_diag[i]) < 0.05,
            "seed " + std::to_string(i) + " below 0.7 and far from true-beta AUC");
  }
  if (!low.empty()) r.note("seeds below 0.7 (posterior/true-beta AUC)" + low);
  r.check(ms >= md, "structured median AUC >= diagonal");
  int wins = 0;
  for (std::size_t i = 0; i < auc_struct.size(); ++i) wins += auc_struct[i] >= auc_diag[i];
  r.note("median AUC structured " + fmt(ms) + " diagonal " + fmt(md) + ", min " + fmt(min_struct) + "/" +
         fmt(min_diag) + ", structured >= diagonal on " + std::to_string(wins) + "/20 seeds");
}

// 12. Byte-identical CLI outputs across repeated invocations.
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return files;
}

void cli_determinism(Report& r, const std::string& cli) {
  if (cli.empty() || !fs::exists(cli)) {
    r.check(false, "shp binary not found at '" + cli + "'");
    return;
  }
  const fs::path root = fs::temp_directory_path() / ("shp_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(root / name, std::ios::binary) << text;
  };
  write("p2.json", R"({"prior": {"family": "sng", "c": 1.0},
    "covariance": {"type": "ar1", "rho": 0.5, "dim": 2},
    "likelihood": {"phi2": 0.1},
    "sampler": {"iterations": 300, "burnin": 50, "seed": 3},
    "em": {"draws_per_step": 300, "max_iter": 5},
    "threshold": {"marginal_rho": 0.5, "ols1_grid": [0.0, 0.5], "ols2_values": [-0.5, 1.0]},
    "diagnostics": {"n_draws": 20000, "conditional_draws": 1000000, "grid": 16, "conditioning_values": [0.0, 1.0]}})");
  write("spn.json", R"({"prior": {"family": "spn"}, "covariance": {"type": "ar1", "rho": 0.5},
    "psi_covariance": {"type": "ar1", "rho": 0.3},
    "sampler": {"iterations": 300, "seed": 4, "hyper_mode": "fully_bayes"}})");
  {
    RngStream rng(1400);
    std::ostringstream x;
    std::ostringstream y;
    x << "x1,x2\n";
    y << "y\n";
    for (int i = 0; i < 25; ++i) {
      const double a = rng.normal();
      const double b = rng.normal();
      x << a << "," << b << "\n";
      y << 1.2 * a - 0.4 * b + 0.3 * rng.normal() << "\n";
    }
    write("x.csv", x.str());
    write("y.csv", y.str());
  }

  const std::string q = "\"";
  const std::string exe = q + cli + q;
  const std::string cfg = q + (root / "p2.json").string() + q;
  const std::string spn = q + (root / "spn.json").string() + q;
  const std::string data = " --x " + q + (root / "x.csv").string() + q + " --y " + q + (root / "y.csv").string() + q;
  struct Command {
    std::string name;
    std::string args;  // "{out}" is replaced by the run's output location
  };
  const std::vector<Command> commands{
      {"simulate", "simulate --config " + cfg + " --n 500 --out {out}/prior.csv"},
      {"fit", "fit --config " + cfg + data + " --out {out}"},
      {"fit-chains", "fit --config " + spn + data + " --chains 2 --out {out}"},
      {"mode", "mode --config " + cfg + data + " --out {out}/mode.json"},
      {"threshold", "threshold --config " + cfg + " --out {out}/threshold.csv"},
      {"diagnose", "diagnose --draws {first}/fit/draws.csv --out {out}/ess.json"},
      {"prior-diagnostics copula", "prior-diagnostics --config " + cfg + " --kind copula --out {out}"},
      {"prior-diagnostics contour", "prior-diagnostics --config " + cfg + " --kind contour --out {out}"},
      {"prior-diagnostics conditional", "prior-diagnostics --config " + cfg + " --kind conditional --out {out}"},
  };
  auto expand = [&](std::string s, const fs::path& out) {
    for (const auto& [key, value] : {std::pair<std::string, std::string>{"{out}", q + out.string() + q},
                                     {"{first}", (root / "run0").string()}}) {
      for (std::size_t pos; (pos = s.find(key)) != std::string::npos;) s.replace(pos, key.size(), value);
    }
    return s;
  };

  int identical = 0;
  for (const auto& c : commands) {
    std::string tag = c.name;
    std::replace(tag.begin(), tag.end(), ' ', '_');
    std::vector<std::map<std::string, std::string>> outputs;
    bool ran = true;
    for (int run = 0; run < 2; ++run) {
      const fs::path out = root / ("run" + std::to_string(run)) / tag;
      fs::create_directories(out);
      const std::string line = exe + " " + expand(c.args, out) + " 2> " + q + (out.string() + ".log") + q;
      ran = ran && std::system(line.c_str()) == 0;
      outputs.push_back(snapshot(out));
    }
    const bool same = ran && !outputs[0].empty() && outputs[0] == outputs[1];
    identical += same;
    r.check(same, c.name + (ran ? " outputs differ" : " exited nonzero"));
  }
  r.note(std::to_string(identical) + "/" + std::to_string(commands.size()) + " commands byte-identical");
  fs::remove_all(root);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shp acceptance checks"};
  std::string cli = SHP_CLI_PATH;
  std::vector<int> only;
  app.add_option("--cli", cli, "path to the shp executable");
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 12));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<void(Report&)>>> criteria{
      {"analytic constants", analytic_constants},
      {"scale moments and kurtosis", moments},
      {"marginal invariance", marginal_invariance},
      {"SNG/SPB family equivalence", family_equivalence},
      {"sampler correctness", sampler_correctness},
      {"SPN block vs ESS sampler", cross_sampler},
      {"posterior mode oracles", mode_oracle},
      {"bivariate thresholding surface", threshold_surface},
      {"coordinate descent", coordinate_descent},
      {"partition algorithm", partition},
      {"logistic pipeline", logistic_pipeline},
      {"CLI determinism", [&cli](Report& r) { cli_determinism(r, cli); }},
  };

  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Report report;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(report);
    } catch (const std::exception& e) {
      report.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !report.ok();
    std::cout << (report.ok() ? "PASS" : "FAIL") << " criterion " << id << ": " << criteria[i].first << " ["
              << report.summary() << "; " << fmt(secs, 3) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
