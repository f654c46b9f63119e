#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vad {

// Base for every error raised by the library. The CLI maps subclasses to exit
// codes, so new failure modes should derive from the closest category below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller-supplied parameters (percentile out of range, perplexity >= n, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// An operation was invoked in the wrong state (e.g. backward without forward).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Data-level failures: malformed input, empty input, mismatched shapes.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class EmptyInputError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

// Scenario definitions that cannot be realised (overlapping windows, ...).
class SpecError : public DataError {
 public:
  using DataError::DataError;
};

class ModelFormatError : public DataError {
 public:
  enum class Kind { Version, Checksum, Shape };
  ModelFormatError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// A numerical optimisation produced non-finite values.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t step, const std::string& what)
      : Error(what + " (at step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace vad
