#pragma once

#include <stdexcept>
#include <string>

namespace csgd {

/// Invalid argument or violated precondition supplied by the caller.
class ParameterError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A point fell outside the box on which an objective's constants are certified.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// NaN or Inf appeared in an iterate, gradient, or accumulator.
class NonFiniteError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver stopped before reaching its tolerance.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

/// Schema or syntax problem in a run configuration. `line` is 1-based, 0 if unknown.
class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const noexcept { return line_; }

private:
  int line_;
};

} // namespace csgd
