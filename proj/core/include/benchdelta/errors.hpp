#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace benchdelta {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data. Carries the 1-based line number and
/// the offending field when known (line 0 means "not line-specific").
class DataError : public Error {
 public:
  DataError(std::string message, std::size_t line = 0, std::string field = {})
      : Error(std::move(message)), line_(line), field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// Bad arguments or preconditions supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Something the host environment must provide is missing (e.g. the code
/// execution adapter).
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace benchdelta
