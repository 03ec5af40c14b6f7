#pragma once

#include <stdexcept>
#include <string>

namespace icm {

// Shape mismatch between operands (argument misuse, exit code 1 at the CLI).
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite values or a diverged computation (exit code 2 at the CLI).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Rank-deficient linear system; the message names the offending column.
class SingularityError : public NumericError {
 public:
  explicit SingularityError(const std::string& what, int column = -1)
      : NumericError(what), column_(column) {}
  int column() const { return column_; }

 private:
  int column_;
};

// Bad configuration key, value, or combination (exit code 1 at the CLI).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// File format or filesystem failure (exit code 3 at the CLI).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace icm
