// shp: batch command-line driver for structured shrinkage priors.

#include <CLI11.hpp>
#include <iostream>

#include "shp/cli/commands.hpp"
#include "shp/cli/errors.hpp"

int main(int argc, char** argv) {
  namespace cli = shp::cli;
  CLI::App app{"Structured Hadamard-product shrinkage priors: simulation, posterior sampling and modes"};
  app.require_subcommand(1);

  std::string config;
  std::string x_path;
  std::string y_path;
  std::string out;
  std::string draws;
  std::string kind;
  std::uint64_t seed = 0;
  std::size_t chains = 1;
  std::size_t pool = 1;
  std::size_t n_draws = 0;

  auto* simulate = app.add_subcommand("simulate", "Write prior draws of beta to CSV");
  auto* fit = app.add_subcommand("fit", "Run the Gibbs sampler; write draws.csv, summary.json, meta.json");
  auto* mode = app.add_subcommand("mode", "Gibbs-within-EM posterior mode");
  auto* threshold = app.add_subcommand("threshold", "Bivariate thresholding surface");
  auto* diagnose = app.add_subcommand("diagnose", "Effective sample sizes of a draws CSV");
  auto* prior_diag = app.add_subcommand("prior-diagnostics", "Copula, contour or conditional prior grids");

  for (auto* sub : {simulate, fit, mode, threshold, prior_diag}) {
    sub->add_option("--config", config, "JSON config")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Seed (overrides sampler.seed)");
  }
  for (auto* sub : {simulate, fit, mode, threshold, prior_diag}) sub->add_option("--out", out, "Output path");
  for (auto* sub : {fit, mode}) {
    sub->add_option("--x", x_path, "Design matrix CSV")->required();
    sub->add_option("--y", y_path, "Response CSV")->required();
    sub->add_option("--pool", pool, "Average blocks of K consecutive columns of X")->check(CLI::PositiveNumber);
  }
  fit->add_option("--chains", chains, "Independent chains")->check(CLI::PositiveNumber);
  simulate->add_option("--n", n_draws, "Number of draws (overrides simulate.n_draws)")->check(CLI::PositiveNumber);
  prior_diag->add_option("--kind", kind, "copula | contour | conditional")
      ->check(CLI::IsMember({"copula", "contour", "conditional"}));
  diagnose->add_option("--draws", draws, "draws.csv from fit")->required();
  diagnose->add_option("--out", out, "Output JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitConfig;
  }

  auto opt_path = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<cli::path>(s); };
  std::optional<std::uint64_t> seed_opt;
  for (auto* sub : app.get_subcommands()) {
    if (sub != diagnose && sub->count("--seed")) seed_opt = seed;
  }

  if (simulate->parsed()) {
    return cli::cmd_simulate(config, opt_path(out), seed_opt,
                             n_draws ? std::optional<std::size_t>(n_draws) : std::nullopt);
  }
  if (fit->parsed()) return cli::cmd_fit(config, x_path, y_path, opt_path(out), seed_opt, chains, pool);
  if (mode->parsed()) return cli::cmd_mode(config, x_path, y_path, opt_path(out), seed_opt, pool);
  if (threshold->parsed()) return cli::cmd_threshold(config, opt_path(out), seed_opt);
  if (diagnose->parsed()) return cli::cmd_diagnose(draws, out);
  if (prior_diag->parsed()) {
    return cli::cmd_prior_diagnostics(config, opt_path(out),
                                      kind.empty() ? std::nullopt : std::optional<std::string>(kind), seed_opt);
  }
  return cli::kExitConfig;
}
