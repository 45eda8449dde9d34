#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tarif {

/// Shapes of two operands are incompatible.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller supplied an argument outside the operation's contract.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative method failed to converge, or a value became non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A row (or vector) that must have positive mass is all zeros.
class DegenerateRowError : public std::invalid_argument {
 public:
  DegenerateRowError(const std::string& what, std::ptrdiff_t row)
      : std::invalid_argument(what), row_(row) {}
  std::ptrdiff_t row() const noexcept { return row_; }

 private:
  std::ptrdiff_t row_;
};

/// Malformed input file; line is 1-based, 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Misuse of an API object, e.g. mixing Vars from two tapes.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace tarif
