#include "shp/cli/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "shp/cli/errors.hpp"

namespace shp::cli {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header row");
  for (auto& h : split(line)) t.header.push_back(trim(h));
  if (t.header.empty()) throw IoError(path.string() + ": empty header row");
  const std::size_t width = t.header.size();

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != width) {
      throw IoError(path.string() + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                    " fields, expected " + std::to_string(width));
    }
    for (const auto& f : fields) {
      const std::string s = trim(f);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw IoError(path.string() + ": line " + std::to_string(line_no) + ": '" + s + "' is not a number");
      }
      values.push_back(v);
    }
    ++rows;
  }
  t.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      t.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * width + j];
    }
  }
  return t;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  std::string row;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    row.clear();
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      if (j) row += ',';
      row += format_double(data(i, j));
    }
    row += '\n';
    out << row;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace shp::cli
