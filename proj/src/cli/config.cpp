#include "shp/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "shp/cli/csv.hpp"
#include "shp/cli/errors.hpp"
#include "shp/errors.hpp"

namespace shp::cli {

namespace {

void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : obj.items()) {
    if (!ok.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

double get_number(const Json& obj, const char* key, const std::string& where) {
  const Json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + "." + key + ": must be finite");
  return x;
}

std::uint64_t get_count(const Json& obj, const char* key, const std::string& where) {
  const Json& v = obj.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw ConfigError(where + "." + key + ": expected a non-negative integer");
}

std::string get_string(const Json& obj, const char* key, const std::string& where) {
  const Json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

bool get_bool(const Json& obj, const char* key, const std::string& where) {
  const Json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
  return v.get<bool>();
}

std::vector<double> get_numbers(const Json& obj, const char* key, const std::string& where) {
  const Json& v = obj.at(key);
  if (!v.is_array()) throw ConfigError(where + "." + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number() || !std::isfinite(x.get<double>())) {
      throw ConfigError(where + "." + key + ": expected an array of finite numbers");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

MatrixXd matrix_from_json(const Json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = static_cast<Eigen::Index>(v.front().is_array() ? v.front().size() : 0);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(where + ": rows must be arrays of equal length");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      const Json& x = row[static_cast<std::size_t>(j)];
      if (!x.is_number()) throw ConfigError(where + ": entries must be numbers");
      m(i, j) = x.get<double>();
    }
  }
  return m;
}

CovarianceConfig parse_covariance(const Json& obj, const std::string& where, const std::filesystem::path& base) {
  check_keys(obj, where, {"type", "rho", "dim", "factors", "matrix_path", "matrix"});
  if (!obj.contains("type")) throw ConfigError(where + ": missing 'type'");
  CovarianceConfig c;
  c.type = get_string(obj, "type", where);
  if (obj.contains("rho")) c.rho = get_number(obj, "rho", where);
  if (obj.contains("dim")) {
    c.dim = get_count(obj, "dim", where);
    if (*c.dim == 0) throw ConfigError(where + ".dim: must be at least 1");
  }
  if (c.type == "ar1") {
    if (!c.rho) throw ConfigError(where + ": ar1 covariance needs 'rho'");
    if (!(std::abs(*c.rho) < 1.0)) throw ConfigError(where + ".rho: must lie in (-1, 1)");
  } else if (c.type == "kronecker") {
    if (!obj.contains("factors") || !obj.at("factors").is_array() || obj.at("factors").size() < 2) {
      throw ConfigError(where + ": kronecker covariance needs at least two 'factors'");
    }
    std::size_t i = 0;
    for (const auto& f : obj.at("factors")) {
      c.factors.push_back(parse_covariance(f, where + ".factors[" + std::to_string(i++) + "]", base));
      if (!c.factors.back().fixed_dim()) throw ConfigError(where + ": every Kronecker factor needs a dimension");
    }
  } else if (c.type == "dense") {
    if (obj.contains("matrix") == obj.contains("matrix_path")) {
      throw ConfigError(where + ": dense covariance needs exactly one of 'matrix' or 'matrix_path'");
    }
    if (obj.contains("matrix")) {
      c.matrix = matrix_from_json(obj.at("matrix"), where + ".matrix");
    } else {
      c.matrix_path = get_string(obj, "matrix_path", where);
      std::filesystem::path path(*c.matrix_path);
      if (path.is_relative()) path = base / path;
      c.matrix = read_csv(path).data;
    }
    try {
      (void)CovStructure::dense(*c.matrix);
    } catch (const std::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  } else if (c.type == "identity") {
  } else {
    throw ConfigError(where + ".type: expected ar1, kronecker, dense or identity, got '" + c.type + "'");
  }
  return c;
}

}  // namespace

std::optional<std::size_t> CovarianceConfig::fixed_dim() const {
  if (type == "dense") return static_cast<std::size_t>(matrix->rows());
  if (type == "kronecker") {
    std::size_t d = 1;
    for (const auto& f : factors) d *= *f.fixed_dim();
    return d;
  }
  return dim;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_config(doc, path.parent_path());
}

RunConfig parse_config(const Json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc, "config", {"prior", "covariance", "psi_covariance", "likelihood", "sampler", "output", "simulate",
                             "em", "threshold", "diagnostics"});
  RunConfig cfg;
  cfg.raw = doc;
  cfg.base_dir = base_dir;

  if (!doc.contains("prior")) throw ConfigError("config: missing 'prior'");
  const Json& prior = doc.at("prior");
  check_keys(prior, "prior", {"family", "c", "q"});
  if (!prior.contains("family")) throw ConfigError("prior: missing 'family'");
  try {
    cfg.family = family_from_string(get_string(prior, "family", "prior"));
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("prior.family: ") + e.what());
  }
  if (prior.contains("c")) cfg.c = get_number(prior, "c", "prior");
  if (prior.contains("q")) cfg.q = get_number(prior, "q", "prior");
  try {
    if (cfg.family == Family::SNG) {
      if (!cfg.c) throw ConfigError("prior: family sng needs 'c'");
      (void)PriorSpec::sng(*cfg.c);
    } else if (cfg.family == Family::SPB) {
      if (!cfg.q) throw ConfigError("prior: family spb needs 'q'");
      (void)PriorSpec::spb(*cfg.q);
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("prior: ") + e.what());
  }
  if (cfg.c && cfg.family != Family::SNG) throw ConfigError("prior.c: only valid for family sng");
  if (cfg.q && cfg.family != Family::SPB) throw ConfigError("prior.q: only valid for family spb");

  if (!doc.contains("covariance")) throw ConfigError("config: missing 'covariance'");
  cfg.covariance = parse_covariance(doc.at("covariance"), "covariance", base_dir);
  if (doc.contains("psi_covariance")) {
    if (cfg.family != Family::SPN && cfg.family != Family::sSPN) {
      throw ConfigError("psi_covariance: only valid for families spn and sspn");
    }
    cfg.psi_covariance = parse_covariance(doc.at("psi_covariance"), "psi_covariance", base_dir);
  }

  if (doc.contains("likelihood")) {
    const Json& lik = doc.at("likelihood");
    check_keys(lik, "likelihood", {"type", "phi2", "intercept"});
    if (lik.contains("type")) {
      const std::string t = get_string(lik, "type", "likelihood");
      if (t != "gaussian" && t != "logistic") {
        throw ConfigError("likelihood.type: expected gaussian or logistic, got '" + t + "'");
      }
      cfg.logistic = t == "logistic";
    }
    if (lik.contains("phi2")) {
      if (cfg.logistic) throw ConfigError("likelihood.phi2: not used by the logistic likelihood");
      cfg.phi2 = get_number(lik, "phi2", "likelihood");
      if (!(cfg.phi2 > 0.0)) throw ConfigError("likelihood.phi2: must be positive");
    }
    if (lik.contains("intercept")) cfg.intercept = get_bool(lik, "intercept", "likelihood");
  }

  if (doc.contains("sampler")) {
    const Json& s = doc.at("sampler");
    const std::string w = "sampler";
    check_keys(s, w, {"iterations", "burnin", "thin", "seed", "nu", "angle_mode", "hyper_mode", "rho_prior",
                      "spn_sampler", "wishart_df"});
    auto& o = cfg.sampler;
    if (s.contains("iterations")) o.iterations = get_count(s, "iterations", w);
    if (s.contains("burnin")) o.burnin = get_count(s, "burnin", w);
    if (s.contains("thin")) o.thin = get_count(s, "thin", w);
    if (o.thin == 0) throw ConfigError("sampler.thin: must be at least 1");
    if (s.contains("seed")) o.seed = get_count(s, "seed", w);
    if (s.contains("nu")) o.nu = get_number(s, "nu", w);
    if (!(o.nu > 0.0)) throw ConfigError("sampler.nu: must be positive");
    if (s.contains("angle_mode")) {
      const std::string m = get_string(s, "angle_mode", w);
      if (m == "auto") o.angle_mode = AngleMode::Auto;
      else if (m == "single") o.angle_mode = AngleMode::Single;
      else if (m == "all") o.angle_mode = AngleMode::All;
      else throw ConfigError("sampler.angle_mode: expected auto, single or all, got '" + m + "'");
    }
    if (s.contains("hyper_mode")) {
      const std::string m = get_string(s, "hyper_mode", w);
      if (m == "fixed") o.hyper_mode = HyperMode::Fixed;
      else if (m == "fully_bayes") o.hyper_mode = HyperMode::FullyBayes;
      else throw ConfigError("sampler.hyper_mode: expected fixed or fully_bayes, got '" + m + "'");
    }
    if (s.contains("rho_prior")) {
      const std::string m = get_string(s, "rho_prior", w);
      if (m == "uniform") o.rho_prior = RhoPrior::Uniform;
      else if (m == "beta22") o.rho_prior = RhoPrior::Beta22;
      else throw ConfigError("sampler.rho_prior: expected uniform or beta22, got '" + m + "'");
    }
    if (s.contains("spn_sampler")) {
      const std::string m = get_string(s, "spn_sampler", w);
      if (m == "block") o.spn_sampler = SpnSampler::Block;
      else if (m == "ess") o.spn_sampler = SpnSampler::Ess;
      else throw ConfigError("sampler.spn_sampler: expected block or ess, got '" + m + "'");
    }
    if (s.contains("wishart_df")) o.wishart_df = get_number(s, "wishart_df", w);
    if (!(o.wishart_df > 0.0)) throw ConfigError("sampler.wishart_df: must be positive");
  }

  if (doc.contains("output")) {
    check_keys(doc.at("output"), "output", {"dir"});
    if (doc.at("output").contains("dir")) cfg.output_dir = get_string(doc.at("output"), "dir", "output");
  }

  if (doc.contains("simulate")) {
    check_keys(doc.at("simulate"), "simulate", {"n_draws"});
    if (doc.at("simulate").contains("n_draws")) cfg.simulate_draws = get_count(doc.at("simulate"), "n_draws", "simulate");
  }

  if (doc.contains("em")) {
    const Json& e = doc.at("em");
    check_keys(e, "em", {"draws_per_step", "max_iter", "tol"});
    if (e.contains("draws_per_step")) cfg.em.draws_per_step = get_count(e, "draws_per_step", "em");
    if (cfg.em.draws_per_step < 100) throw ConfigError("em.draws_per_step: must be at least 100");
    if (e.contains("max_iter")) cfg.em.max_iter = get_count(e, "max_iter", "em");
    if (cfg.em.max_iter == 0) throw ConfigError("em.max_iter: must be at least 1");
    if (e.contains("tol")) {
      const Json& t = e.at("tol");
      if (t.is_string() && t.get<std::string>() == "inf") {
        cfg.em.tol = HUGE_VAL;
      } else if (t.is_number() && t.get<double>() > 0.0) {
        cfg.em.tol = t.get<double>();
      } else {
        throw ConfigError("em.tol: expected a positive number or \"inf\"");
      }
    }
  }

  if (doc.contains("threshold")) {
    const Json& t = doc.at("threshold");
    check_keys(t, "threshold", {"marginal_rho", "phi2", "ols1_grid", "ols2_values"});
    auto& o = cfg.threshold;
    if (t.contains("marginal_rho")) {
      o.marginal_rho = get_number(t, "marginal_rho", "threshold");
      if (!(std::abs(*o.marginal_rho) < 1.0)) throw ConfigError("threshold.marginal_rho: must lie in (-1, 1)");
    }
    if (t.contains("phi2")) {
      o.phi2 = get_number(t, "phi2", "threshold");
      if (!(*o.phi2 > 0.0)) throw ConfigError("threshold.phi2: must be positive");
    }
    if (t.contains("ols1_grid")) {
      const Json& g = t.at("ols1_grid");
      if (g.is_object()) {
        check_keys(g, "threshold.ols1_grid", {"from", "to", "num"});
        if (!g.contains("from") || !g.contains("to") || !g.contains("num")) {
          throw ConfigError("threshold.ols1_grid: needs from, to and num");
        }
        const double from = get_number(g, "from", "threshold.ols1_grid");
        const double to = get_number(g, "to", "threshold.ols1_grid");
        const std::uint64_t num = get_count(g, "num", "threshold.ols1_grid");
        if (num < 1) throw ConfigError("threshold.ols1_grid.num: must be at least 1");
        for (std::uint64_t i = 0; i < num; ++i) {
          o.ols1_grid.push_back(num == 1 ? from : from + (to - from) * static_cast<double>(i) / static_cast<double>(num - 1));
        }
      } else {
        o.ols1_grid = get_numbers(t, "ols1_grid", "threshold");
      }
    }
    if (t.contains("ols2_values")) o.ols2_values = get_numbers(t, "ols2_values", "threshold");
  }
  if (cfg.threshold.ols1_grid.empty()) {
    for (int i = 0; i <= 20; ++i) cfg.threshold.ols1_grid.push_back(-1.0 + 0.1 * i);
  }

  if (doc.contains("diagnostics")) {
    const Json& d = doc.at("diagnostics");
    check_keys(d, "diagnostics", {"kind", "n_draws", "conditional_draws", "grid", "conditioning_values"});
    auto& o = cfg.diagnostics;
    if (d.contains("kind")) {
      o.kind = get_string(d, "kind", "diagnostics");
      if (o.kind != "copula" && o.kind != "contour" && o.kind != "conditional") {
        throw ConfigError("diagnostics.kind: expected copula, contour or conditional, got '" + o.kind + "'");
      }
    }
    if (d.contains("n_draws")) o.n_draws = get_count(d, "n_draws", "diagnostics");
    if (d.contains("conditional_draws")) o.conditional_draws = get_count(d, "conditional_draws", "diagnostics");
    if (o.n_draws < 100 || o.conditional_draws < 100) throw ConfigError("diagnostics: draw counts must be at least 100");
    if (d.contains("grid")) o.grid = get_count(d, "grid", "diagnostics");
    if (o.grid < 2) throw ConfigError("diagnostics.grid: must be at least 2");
    if (d.contains("conditioning_values")) o.conditioning_values = get_numbers(d, "conditioning_values", "diagnostics");
  }
  return cfg;
}

CovStructure build_covariance(const CovarianceConfig& cfg, std::size_t p, const std::filesystem::path& base_dir) {
  if (auto d = cfg.fixed_dim(); d && *d != p) {
    throw DataError("covariance has dimension " + std::to_string(*d) + " but the problem has " + std::to_string(p) +
                    " coefficients");
  }
  if (cfg.type == "ar1") return CovStructure::ar1(*cfg.rho, p);
  if (cfg.type == "identity") return CovStructure::identity(p);
  if (cfg.type == "dense") return CovStructure::dense(*cfg.matrix);
  std::vector<CovStructure> factors;
  for (const auto& f : cfg.factors) factors.push_back(build_covariance(f, *f.fixed_dim(), base_dir));
  return CovStructure::kronecker(std::move(factors));
}

std::size_t config_dimension(const RunConfig& cfg) {
  if (auto d = cfg.covariance.fixed_dim()) return *d;
  throw ConfigError("covariance: 'dim' is required when no data fix the dimension");
}

PriorSpec build_prior(const RunConfig& cfg, std::size_t p) {
  switch (cfg.family) {
    case Family::SNG:
      return PriorSpec::sng(*cfg.c);
    case Family::SPB:
      return PriorSpec::spb(*cfg.q);
    case Family::SPN:
    case Family::sSPN: {
      CovStructure psi = cfg.psi_covariance ? build_covariance(*cfg.psi_covariance, p, cfg.base_dir)
                                            : CovStructure::identity(p);
      try {
        return cfg.family == Family::SPN ? PriorSpec::spn(std::move(psi)) : PriorSpec::sspn(std::move(psi));
      } catch (const InvalidInput& e) {
        throw ConfigError(std::string("psi_covariance: ") + e.what());
      }
    }
  }
  throw ConfigError("unknown prior family");
}

ChainConfig chain_config(const RunConfig& cfg) {
  ChainConfig c;
  const auto& s = cfg.sampler;
  c.iterations = s.iterations;
  c.burnin = s.burnin;
  c.thin = s.thin;
  c.seed = s.seed;
  c.nu = s.nu;
  c.angle_mode = s.angle_mode;
  c.hyper_mode = s.hyper_mode;
  c.rho_prior = s.rho_prior;
  c.spn_sampler = s.spn_sampler;
  c.wishart_df = s.wishart_df;
  return c;
}

EmConfig em_config(const RunConfig& cfg) {
  EmConfig e;
  e.draws_per_step = cfg.em.draws_per_step;
  e.max_iter = cfg.em.max_iter;
  e.tol = cfg.em.tol;
  e.seed = cfg.sampler.seed;
  e.nu = cfg.sampler.nu;
  e.angle_mode = cfg.sampler.angle_mode;
  return e;
}

}  // namespace shp::cli
