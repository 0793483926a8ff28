#pragma once

#include <stdexcept>
#include <string>

namespace ade {

// Bad invocation: malformed config, unknown flag values, invalid run settings.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

// Bad input data: unreadable/corrupt datasets, checkpoints, or vocab mismatches.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric-graph failures, e.g. a non-finite op output in checked mode.
struct GraphError : std::runtime_error {
  explicit GraphError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ade
