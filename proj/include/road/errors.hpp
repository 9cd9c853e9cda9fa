#pragma once

#include <stdexcept>
#include <string>

namespace road {

// Thrown for invalid configuration: bad layer chains, empty grids, bad flags.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when an input file cannot be parsed (CSV cell, model file, JSONL).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a quantity is undefined for the given data, e.g. disparate
// impact on a set with only one sensitive group present.
struct UndefinedMetricError : std::runtime_error {
  explicit UndefinedMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on non-finite values or out-of-domain numeric arguments.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace road
