#ifndef SHP_CLI_ERRORS_HPP
#define SHP_CLI_ERRORS_HPP

#include <stdexcept>

namespace shp::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitIo = 3,
  kExitData = 4,
  kExitRuntime = 5,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace shp::cli

#endif  // SHP_CLI_ERRORS_HPP
