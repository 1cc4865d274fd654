#pragma once

#include <stdexcept>
#include <string>

namespace softpref {

// Error taxonomy mirrored by CLI exit codes:
//   ConfigError -> 1 (usage / configuration), DataError and NumericError -> 2.

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values where finite math was required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace softpref
