#ifndef RISKCAL_ERRORS_HPP
#define RISKCAL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace riskcal {

// Bad user-supplied configuration (flags, config file, parameter ranges).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed, inconsistent, or degenerate input data.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace riskcal

#endif
