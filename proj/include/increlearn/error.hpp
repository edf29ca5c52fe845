#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace increlearn {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters: bad thresholds, bad split fractions, Q too small, ...
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input vector has the wrong length for the model or dataset it meets.
class DimensionError : public Error {
 public:
  DimensionError(std::size_t expected, std::size_t actual)
      : Error("dimension mismatch: expected " + std::to_string(expected) +
              ", got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

// Malformed or inconsistent data, optionally tied to a line of an input file.
class DataError : public Error {
 public:
  enum class Kind {
    malformed_header,
    dimension_mismatch,
    unknown_class,
    non_finite_value,
    malformed_row,
    duplicate_id,
    missing_label,
    empty,
    io,
  };

  DataError(Kind kind, const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        kind_(kind),
        line_(line) {}

  Kind kind() const { return kind_; }
  // 1-based line number, 0 when the error is not tied to a file position.
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

}  // namespace increlearn
