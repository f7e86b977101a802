#include "shp/cli/commands.hpp"

#include <cmath>
#include <functional>
#include <iostream>

#include "shp/cli/config.hpp"
#include "shp/cli/csv.hpp"
#include "shp/cli/errors.hpp"
#include "shp/diagnostics.hpp"
#include "shp/errors.hpp"
#include "shp/estimation.hpp"
#include "shp/prior_diagnostics.hpp"
#include "shp/sampler.hpp"

namespace shp::cli {

namespace {

int guarded(const char* verb, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "shp " << verb << ": config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "shp " << verb << ": I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const DataError& e) {
    std::cerr << "shp " << verb << ": data error: " << e.what() << '\n';
    return kExitData;
  } catch (const UnsupportedFamily& e) {
    std::cerr << "shp " << verb << ": config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidInput& e) {
    std::cerr << "shp " << verb << ": data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "shp " << verb << ": runtime error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

RunConfig load(const path& config, std::optional<std::uint64_t> seed) {
  RunConfig cfg = load_config(config);
  if (seed) cfg.sampler.seed = *seed;
  return cfg;
}

path output_path(const std::optional<path>& flag, const RunConfig& cfg, const char* default_name) {
  if (flag) return *flag;
  if (cfg.output_dir) {
    path dir(*cfg.output_dir);
    if (dir.is_relative()) dir = cfg.base_dir / dir;
    return dir / default_name;
  }
  throw ConfigError("no output location: pass --out or set output.dir");
}

path output_dir(const std::optional<path>& flag, const RunConfig& cfg) {
  path dir;
  if (flag) {
    dir = *flag;
  } else if (cfg.output_dir) {
    dir = *cfg.output_dir;
    if (dir.is_relative()) dir = cfg.base_dir / dir;
  } else {
    throw ConfigError("no output location: pass --out or set output.dir");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void ensure_parent(const path& file) {
  if (!file.has_parent_path()) return;
  std::error_code ec;
  std::filesystem::create_directories(file.parent_path(), ec);
  if (ec) throw IoError("cannot create " + file.parent_path().string() + ": " + ec.message());
}

Json number(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

struct Data {
  Likelihood likelihood;
  std::size_t n;
  std::size_t p;
};

Data load_data(const RunConfig& cfg, const path& x_path, const path& y_path, std::size_t pool) {
  const Table xt = read_csv(x_path);
  const Table yt = read_csv(y_path);
  if (yt.data.cols() != 1) throw DataError("y must have exactly one column, found " + std::to_string(yt.data.cols()));
  if (xt.data.rows() != yt.data.rows()) {
    throw DataError("X has " + std::to_string(xt.data.rows()) + " rows but y has " + std::to_string(yt.data.rows()));
  }
  if (xt.data.rows() == 0) throw DataError("X has no rows");
  MatrixXd x = pool > 1 ? pool_columns(xt.data, pool) : xt.data;
  const VectorXd y = yt.data.col(0);
  try {
    Likelihood lik = cfg.logistic ? Likelihood::logistic(x, y, cfg.intercept)
                                  : Likelihood::gaussian(x, y, cfg.phi2, cfg.intercept);
    const auto n = static_cast<std::size_t>(lik.n());
    const auto p = static_cast<std::size_t>(lik.p());
    return {std::move(lik), n, p};
  } catch (const InvalidInput& e) {
    throw DataError(e.what());
  }
}

std::function<void(std::size_t, std::size_t)> progress_printer(std::string label) {
  return [label = std::move(label), last = std::size_t{0}](std::size_t done, std::size_t total) mutable {
    if (total == 0) return;
    const std::size_t pct = done * 100 / total;
    if (pct / 5 > last / 5 || done == total) {
      if (pct != last) std::cerr << label << ": " << pct << "% (" << done << "/" << total << ")\n";
      last = pct;
    }
  };
}

Json summary_json(const ChainOutput& chain) {
  Json params = Json::object();
  double min_ess = HUGE_VAL;
  for (std::size_t j = 0; j < chain.names.size(); ++j) {
    Json entry = Json::object();
    if (j < chain.summary.size()) {
      const ParamSummary& s = chain.summary[j];
      entry["mean"] = number(s.mean);
      entry["median"] = number(s.median);
      entry["sd"] = number(s.sd);
      entry["q2.5"] = number(s.q025);
      entry["q97.5"] = number(s.q975);
      entry["ess"] = number(s.ess);
      entry["ess_constant"] = s.ess_constant;
      min_ess = std::min(min_ess, s.ess);
    }
    params[chain.names[j]] = entry;
  }
  Json out = Json::object();
  out["kept_draws"] = chain.draws.rows();
  out["parameters"] = params;
  out["min_ess"] = chain.draws.rows() >= 10 ? number(min_ess) : Json(nullptr);
  return out;
}

}  // namespace

Eigen::MatrixXd pool_columns(const Eigen::MatrixXd& x, std::size_t k) {
  if (k == 0) throw DataError("--pool must be at least 1");
  const auto kk = static_cast<Eigen::Index>(k);
  if (x.cols() % kk != 0) {
    throw DataError("--pool " + std::to_string(k) + " does not divide the " + std::to_string(x.cols()) + " columns of X");
  }
  MatrixXd out(x.rows(), x.cols() / kk);
  for (Eigen::Index b = 0; b < out.cols(); ++b) out.col(b) = x.middleCols(b * kk, kk).rowwise().mean();
  return out;
}

int cmd_simulate(const path& config, const std::optional<path>& out, std::optional<std::uint64_t> seed,
                 std::optional<std::size_t> n_draws) {
  return guarded("simulate", [&] {
    const RunConfig cfg = load(config, seed);
    const std::size_t p = config_dimension(cfg);
    const std::size_t n = n_draws.value_or(cfg.simulate_draws);
    const CovStructure omega = build_covariance(cfg.covariance, p, cfg.base_dir);
    const PriorSpec prior = build_prior(cfg, p);
    RngStream rng(cfg.sampler.seed);
    const MatrixXd draws = simulate_prior(prior, omega, n, rng);
    std::vector<std::string> header;
    for (std::size_t j = 0; j < p; ++j) header.push_back("beta_" + std::to_string(j + 1));
    const path file = output_path(out, cfg, "prior_draws.csv");
    ensure_parent(file);
    write_csv(file, header, draws);
    return int{kExitOk};
  });
}

int cmd_fit(const path& config, const path& x, const path& y, const std::optional<path>& out_dir,
            std::optional<std::uint64_t> seed, std::size_t chains, std::size_t pool) {
  return guarded("fit", [&] {
    const RunConfig cfg = load(config, seed);
    if (chains == 0) throw ConfigError("--chains must be at least 1");
    const Data data = load_data(cfg, x, y, pool);
    const CovStructure omega = build_covariance(cfg.covariance, data.p, cfg.base_dir);
    const PriorSpec prior = build_prior(cfg, data.p);
    const path dir = output_dir(out_dir, cfg);

    int status = kExitOk;
    for (std::size_t c = 0; c < chains; ++c) {
      ChainConfig cc = chain_config(cfg);
      if (chains > 1) cc.seed = RngStream(cfg.sampler.seed).substream(c).seed();
      cc.progress = progress_printer(chains > 1 ? "fit chain " + std::to_string(c + 1) : "fit");
      const ChainOutput chain = run_chain(data.likelihood, prior, omega, cc);

      path chain_dir = dir;
      if (chains > 1) {
        chain_dir = dir / ("chain_" + std::to_string(c + 1));
        std::error_code ec;
        std::filesystem::create_directories(chain_dir, ec);
        if (ec) throw IoError("cannot create " + chain_dir.string());
      }
      write_csv(chain_dir / "draws.csv", chain.names, chain.draws);
      Json summary = summary_json(chain);
      summary["partial"] = chain.partial;
      write_text(chain_dir / "summary.json", summary.dump(2) + "\n");

      Json meta = Json::object();
      meta["command"] = "fit";
      meta["config"] = cfg.raw;
      meta["seed"] = cc.seed;
      meta["chain"] = c + 1;
      meta["chains"] = chains;
      meta["n"] = data.n;
      meta["p"] = data.p;
      meta["pool"] = pool;
      meta["runtime"] = {{"iterations", cc.iterations},
                         {"sweeps_completed", chain.sweeps_completed},
                         {"kept_draws", chain.draws.rows()}};
      Json warnings = Json::object();
      for (const auto& [k, v] : chain.warnings) warnings[k] = v;
      meta["warnings"] = warnings;
      meta["partial"] = chain.partial;
      meta["error"] = chain.partial ? Json(chain.error) : Json(nullptr);
      write_text(chain_dir / "meta.json", meta.dump(2) + "\n");
      if (chain.partial) {
        std::cerr << "shp fit: sampler aborted after " << chain.sweeps_completed << " sweeps: " << chain.error << '\n';
        status = kExitRuntime;
      }
    }
    return status;
  });
}

int cmd_mode(const path& config, const path& x, const path& y, const std::optional<path>& out,
             std::optional<std::uint64_t> seed, std::size_t pool) {
  return guarded("mode", [&] {
    const RunConfig cfg = load(config, seed);
    const Data data = load_data(cfg, x, y, pool);
    const CovStructure omega = build_covariance(cfg.covariance, data.p, cfg.base_dir);
    const PriorSpec prior = build_prior(cfg, data.p);
    const EmResult r = em_posterior_mode(data.likelihood, prior, omega, em_config(cfg));
    Json doc = Json::object();
    Json beta = Json::array();
    for (Eigen::Index j = 0; j < r.beta.size(); ++j) beta.push_back(number(r.beta(j)));
    doc["beta_mode"] = beta;
    if (data.likelihood.has_intercept()) doc["gamma"] = number(r.gamma);
    Json trace = Json::array();
    for (double v : r.objective_trace) trace.push_back(number(v));
    doc["objective_trace"] = trace;
    doc["em_iterations"] = r.iterations;
    doc["converged"] = r.converged;
    doc["sparsity_threshold"] = kSparsityThreshold;
    doc["sparsity_pattern"] = r.sparsity;
    Json warnings = Json::object();
    for (const auto& [k, v] : r.warnings) warnings[k] = v;
    doc["warnings"] = warnings;
    const path file = output_path(out, cfg, "mode.json");
    ensure_parent(file);
    write_text(file, doc.dump(2) + "\n");
    return int{kExitOk};
  });
}

int cmd_threshold(const path& config, const std::optional<path>& out, std::optional<std::uint64_t> seed) {
  return guarded("threshold", [&] {
    const RunConfig cfg = load(config, seed);
    const std::size_t p = config_dimension(cfg);
    if (p != 2) throw ConfigError("threshold needs a 2-dimensional covariance, got dimension " + std::to_string(p));
    const PriorSpec prior = build_prior(cfg, 2);
    CovStructure omega = build_covariance(cfg.covariance, 2, cfg.base_dir);
    if (cfg.threshold.marginal_rho) {
      try {
        omega = CovStructure::dense(omega_for_marginal_correlation(prior, *cfg.threshold.marginal_rho));
      } catch (const InvalidInput& e) {
        throw ConfigError(std::string("threshold.marginal_rho: ") + e.what());
      }
    }
    const double phi2 = cfg.threshold.phi2.value_or(cfg.phi2);
    const auto surface = bivariate_threshold_surface(prior, omega, phi2, cfg.threshold.ols2_values,
                                                     cfg.threshold.ols1_grid, em_config(cfg));
    MatrixXd table(static_cast<Eigen::Index>(surface.size()), 4);
    for (std::size_t i = 0; i < surface.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      table.row(r) << surface[i].ols1, surface[i].ols2, surface[i].beta1, surface[i].beta2;
    }
    const path file = output_path(out, cfg, "threshold.csv");
    ensure_parent(file);
    write_csv(file, {"ols1", "ols2", "betahat1", "betahat2"}, table);
    return int{kExitOk};
  });
}

int cmd_diagnose(const path& draws, const path& out) {
  return guarded("diagnose", [&] {
    const Table t = read_csv(draws);
    if (t.data.rows() < 10) {
      throw DataError("need at least 10 draws, found " + std::to_string(t.data.rows()));
    }
    Json columns = Json::object();
    double min_ess = HUGE_VAL;
    std::string min_name;
    for (Eigen::Index j = 0; j < t.data.cols(); ++j) {
      const EssResult e = effective_sample_size(t.data.col(j));
      columns[t.header[static_cast<std::size_t>(j)]] = {{"ess", number(e.value)}, {"constant", e.constant}};
      if (e.value < min_ess) {
        min_ess = e.value;
        min_name = t.header[static_cast<std::size_t>(j)];
      }
    }
    Json doc = Json::object();
    doc["draws"] = t.data.rows();
    doc["columns"] = columns;
    doc["min_ess"] = number(min_ess);
    doc["min_ess_column"] = min_name;
    ensure_parent(out);
    write_text(out, doc.dump(2) + "\n");
    return int{kExitOk};
  });
}

int cmd_prior_diagnostics(const path& config, const std::optional<path>& out_dir, const std::optional<std::string>& kind,
                          std::optional<std::uint64_t> seed) {
  return guarded("prior-diagnostics", [&] {
    const RunConfig cfg = load(config, seed);
    const std::size_t p = config_dimension(cfg);
    if (p != 2) {
      throw ConfigError("prior-diagnostics needs a 2-dimensional covariance, got dimension " + std::to_string(p));
    }
    const std::string k = kind.value_or(cfg.diagnostics.kind);
    if (k != "copula" && k != "contour" && k != "conditional") {
      throw ConfigError("kind must be copula, contour or conditional, got '" + k + "'");
    }
    const PriorSpec prior = build_prior(cfg, 2);
    const CovStructure omega = build_covariance(cfg.covariance, 2, cfg.base_dir);
    const path dir = output_dir(out_dir, cfg);
    const auto& d = cfg.diagnostics;
    RngStream rng(cfg.sampler.seed);

    if (k == "conditional") {
      std::vector<std::array<double, 3>> rows;
      for (double value : d.conditioning_values) {
        RngStream sub = rng.substream(rows.size());
        const DensityCurve curve = conditional_prior_curve(prior, omega, value, d.conditional_draws, d.grid, sub);
        for (Eigen::Index i = 0; i < curve.x.size(); ++i) rows.push_back({value, curve.x(i), curve.density(i)});
      }
      MatrixXd table(static_cast<Eigen::Index>(rows.size()), 3);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        table.row(static_cast<Eigen::Index>(i)) << rows[i][0], rows[i][1], rows[i][2];
      }
      write_csv(dir / "conditional.csv", {"beta2_value", "beta1", "density"}, table);
      return int{kExitOk};
    }

    const DensityGrid g = k == "copula" ? copula_grid(prior, omega, d.n_draws, d.grid, rng)
                                        : prior_contour_grid(prior, omega, d.grid, d.n_draws, rng);
    const MatrixXd logd = log_density(g);
    MatrixXd table(g.x.size() * g.y.size(), 4);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < g.x.size(); ++i) {
      for (Eigen::Index j = 0; j < g.y.size(); ++j) {
        table.row(r++) << g.x(i), g.y(j), g.density(i, j), k == "copula" ? g.std_error(i, j) : logd(i, j);
      }
    }
    if (k == "copula") {
      write_csv(dir / "copula.csv", {"u1", "u2", "density", "std_error"}, table);
    } else {
      write_csv(dir / "contour.csv", {"beta1", "beta2", "density", "log_density"}, table);
    }
    return int{kExitOk};
  });
}

}  // namespace shp::cli
