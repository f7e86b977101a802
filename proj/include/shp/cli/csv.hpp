#ifndef SHP_CLI_CSV_HPP
#define SHP_CLI_CSV_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace shp::cli {

struct Table {
  std::vector<std::string> header;
  Eigen::MatrixXd data;
};

/// Comma-separated, header row required, every row the same width.
/// Throws IoError on unreadable or malformed files.
Table read_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double x);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& data);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace shp::cli

#endif  // SHP_CLI_CSV_HPP
