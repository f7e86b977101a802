#ifndef SHP_ERRORS_HPP
#define SHP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace shp {

/// Bad arguments: degenerate intervals, malformed matrices, non-finite
/// starting values.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A parameter lies outside the support of the function being evaluated.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The operation is not defined for the requested prior family.
class UnsupportedFamily : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Cholesky / eigen decomposition failed (matrix not PSD or singular).
class DecompositionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too few Monte Carlo draws survived a selection step.
class InsufficientSample : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Markov chain update could not complete. `where` names the update.
class SamplerError : public std::runtime_error {
 public:
  SamplerError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace shp

#endif  // SHP_ERRORS_HPP
