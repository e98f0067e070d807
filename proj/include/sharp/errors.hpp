#pragma once

#include <stdexcept>
#include <string>

namespace sharp {

// Bad dimensions, impossible hyperparameters, malformed setup.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse (e.g. backward before forward).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file; carries the byte offset of the problem.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset;
};

}  // namespace sharp
