#pragma once

#include <stdexcept>
#include <string>

namespace trajsv {

/// Shape or range violation in an argument.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid or inconsistent configuration (maps to CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing input data (maps to CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation invoked on an object in the wrong state, e.g. querying an unbuilt index.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace trajsv
