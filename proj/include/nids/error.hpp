#pragma once

#include <stdexcept>
#include <string>

namespace nids {

// Malformed or unusable input data (bad CSV, empty after cleaning, ...).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments supplied by the caller.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Numerical failure during training (e.g. NaN loss).
class TrainingDiverged : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A pipeline stage aborted. Carries the stage name and whether the root cause was bad data.
class StageError : public std::runtime_error {
public:
  StageError(std::string stage, const std::string& cause, bool data_error)
      : std::runtime_error("stage '" + stage + "' failed: " + cause),
        stage_(std::move(stage)),
        data_error_(data_error) {}

  const std::string& stage() const noexcept { return stage_; }
  bool data_error() const noexcept { return data_error_; }

private:
  std::string stage_;
  bool data_error_;
};

}  // namespace nids
