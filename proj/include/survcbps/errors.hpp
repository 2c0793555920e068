#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace survcbps {

// Root of the library's exception hierarchy. The CLI maps each branch to an
// exit code: DataError -> 2, ConvergenceError -> 3, DegenerateError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: unreadable file, missing column, bad cell, bad config.
class DataError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

// A cell-level parse failure; `row` is 1-based over data rows (header excluded).
class ParseError : public DataError {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : DataError("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

// The data cannot support the estimator (empty arm, no uncensored subjects,
// singular information matrix).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

// An iterative solver failed to produce a usable answer.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace survcbps
