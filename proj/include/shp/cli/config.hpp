#ifndef SHP_CLI_CONFIG_HPP
#define SHP_CLI_CONFIG_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shp/covariance.hpp"
#include "shp/estimation.hpp"
#include "shp/prior.hpp"
#include "shp/sampler.hpp"

namespace shp::cli {

using Json = nlohmann::ordered_json;

struct CovarianceConfig {
  std::string type;  ///< "ar1" | "kronecker" | "dense" | "identity"
  std::optional<double> rho;
  std::optional<std::size_t> dim;
  std::vector<CovarianceConfig> factors;
  std::optional<std::string> matrix_path;
  std::optional<MatrixXd> matrix;

  /// Dimension if determined by the config alone.
  std::optional<std::size_t> fixed_dim() const;
};

struct SamplerSettings {
  std::size_t iterations = 1000;
  std::size_t burnin = 0;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  double nu = 1.0;
  AngleMode angle_mode = AngleMode::Auto;
  HyperMode hyper_mode = HyperMode::Fixed;
  RhoPrior rho_prior = RhoPrior::Beta22;
  SpnSampler spn_sampler = SpnSampler::Block;
  double wishart_df = 10.0;
};

struct EmSettings {
  std::size_t draws_per_step = 1000;
  std::size_t max_iter = 100;
  double tol = 1e-6;
};

struct ThresholdSettings {
  std::optional<double> marginal_rho;
  std::optional<double> phi2;
  std::vector<double> ols1_grid;
  std::vector<double> ols2_values{-0.5, 0.0, 0.5, 1.0};
};

struct DiagnosticsSettings {
  std::string kind = "copula";
  std::size_t n_draws = 200000;
  std::size_t conditional_draws = 1000000;
  std::size_t grid = 64;
  std::vector<double> conditioning_values{0.0, 2.0};
};

struct RunConfig {
  Json raw;
  std::filesystem::path base_dir;

  Family family = Family::SNG;
  std::optional<double> c;
  std::optional<double> q;
  CovarianceConfig covariance;
  std::optional<CovarianceConfig> psi_covariance;

  bool logistic = false;
  double phi2 = 1.0;
  bool intercept = false;

  SamplerSettings sampler;
  std::optional<std::string> output_dir;
  std::size_t simulate_draws = 1000;
  EmSettings em;
  ThresholdSettings threshold;
  DiagnosticsSettings diagnostics;
};

/// Parse and validate a JSON config. Unknown keys and out-of-range values
/// raise ConfigError; an unreadable file raises IoError.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const Json& doc, const std::filesystem::path& base_dir);

/// Covariance of the given dimension (checked against the config).
CovStructure build_covariance(const CovarianceConfig& cfg, std::size_t p, const std::filesystem::path& base_dir);
/// Dimension from the covariance config; ConfigError if it is not determined.
std::size_t config_dimension(const RunConfig& cfg);

PriorSpec build_prior(const RunConfig& cfg, std::size_t p);

ChainConfig chain_config(const RunConfig& cfg);
EmConfig em_config(const RunConfig& cfg);

}  // namespace shp::cli

#endif  // SHP_CLI_CONFIG_HPP
