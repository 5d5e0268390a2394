#pragma once

#include <stdexcept>
#include <string>

namespace hrpm {

// Error families map onto the CLI exit codes: config errors exit 2, data
// errors exit 3, training divergence exits 4.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number of the offending row.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

class WindowError : public DataError {
 public:
  using DataError::DataError;
};

class LiquidityError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation invoked in the wrong state (step after done, backward without forward).
class LifecycleError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class InfeasibleRebalance : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hrpm
