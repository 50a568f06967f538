#pragma once

#include <stdexcept>
#include <string>

namespace h2blend {

/// Input outside the physical domain of a function (negative density, eta > 1, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed network or scenario document. `where` names the offending item.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& where, const std::string& what)
      : std::runtime_error(where.empty() ? what : where + ": " + what), where_(where), detail_(what) {}

  const std::string& where() const noexcept { return where_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string where_;
  std::string detail_;
};

/// Inconsistent run configuration (dt does not divide the horizon, bad overrides).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The NLP cannot be assembled from the given data (crossed bounds, empty network).
class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A residual was evaluated outside its domain, e.g. non-positive mean density.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace h2blend
