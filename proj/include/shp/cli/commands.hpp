#ifndef SHP_CLI_COMMANDS_HPP
#define SHP_CLI_COMMANDS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace shp::cli {

using std::filesystem::path;

/// Every command returns a process exit code (see errors.hpp) and reports
/// failures on standard error.

int cmd_simulate(const path& config, const std::optional<path>& out, std::optional<std::uint64_t> seed,
                 std::optional<std::size_t> n_draws);

int cmd_fit(const path& config, const path& x, const path& y, const std::optional<path>& out_dir,
            std::optional<std::uint64_t> seed, std::size_t chains, std::size_t pool);

int cmd_mode(const path& config, const path& x, const path& y, const std::optional<path>& out,
             std::optional<std::uint64_t> seed, std::size_t pool);

int cmd_threshold(const path& config, const std::optional<path>& out, std::optional<std::uint64_t> seed);

int cmd_diagnose(const path& draws, const path& out);

int cmd_prior_diagnostics(const path& config, const std::optional<path>& out_dir, const std::optional<std::string>& kind,
                          std::optional<std::uint64_t> seed);

/// Average each block of k consecutive columns.
Eigen::MatrixXd pool_columns(const Eigen::MatrixXd& x, std::size_t k);

}  // namespace shp::cli

#endif  // SHP_CLI_COMMANDS_HPP
