#pragma once

#include <stdexcept>
#include <string>

namespace annotruth {

// Malformed or inconsistent input data (parse failures, dangling references,
// unknown classes, violated preconditions on user data).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace annotruth
