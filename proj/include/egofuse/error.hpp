#pragma once

#include <stdexcept>
#include <string>

namespace egofuse {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable, corrupt or invalid input data (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// Numerical routine failed to produce a usable result.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace egofuse
