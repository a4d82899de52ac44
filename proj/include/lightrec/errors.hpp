#pragma once

#include <stdexcept>
#include <string>

namespace lightrec {

// Shape mismatches are always hard errors; nothing in this library broadcasts.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

// Input violates a documented precondition (e.g. unnormalized distribution rows).
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error("domain error: " + msg) {}
};

// Invalid configuration value (bit widths, group counts, schedules, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// Non-finite values where finite ones are required (diverged training, bad loss).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

}  // namespace lightrec
