#pragma once

#include <stdexcept>
#include <string>

namespace artdet {

// Error families. The CLI maps each to a distinct exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Calling an operation out of order (e.g. backward before forward).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace artdet
