#pragma once

#include <stdexcept>
#include <string>

namespace fairhpo {

// Config-file and search-space definition problems. CLI maps these to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dataset ingestion / splitting problems.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Metric preconditions (empty class, no qualifying group, ...).
struct MetricError : std::runtime_error {
  explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tuner-level failures (no successful trials, propagated evaluator failure, ...).
struct TunerError : std::runtime_error {
  explicit TunerError(const std::string& msg) : std::runtime_error(msg) {}
};

// Model training failures (divergence, malformed hyperparameters). Converted
// to failed evaluation outcomes at the evaluator boundary.
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

// Harness/runtime failures. CLI maps these to exit code 2.
struct HarnessError : std::runtime_error {
  explicit HarnessError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fairhpo
