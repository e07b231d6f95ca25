#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gplvm {

/// Base of every recoverable error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: unreadable files, malformed tables, failed validation.
class InputError : public Error {
public:
  using Error::Error;
};

class FormatError : public InputError {
public:
  FormatError(const std::string &what, std::size_t row, std::size_t column)
      : InputError(what + " (row " + std::to_string(row) + ", column " +
                   std::to_string(column) + ")"),
        row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t row_;
  std::size_t column_;
};

class ValidationError : public InputError {
public:
  using InputError::InputError;
};

/// A factorization or optimization that could not be completed.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// A caller broke a documented precondition (dimension mismatch, bad enum).
class ContractViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

} // namespace gplvm
