#pragma once

#include <stdexcept>
#include <string>

namespace npi {

// Shape or configuration problems: mismatched dimensions, empty inputs, bad budgets.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed user input (digit strings, CLI arguments, task instances).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Illegal environment transitions, e.g. a WRITE to a read-only row.
struct EnvironmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Program registry problems (duplicate names, unknown programs).
struct RegistrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Trace data that references unknown programs or cannot be parsed.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint files that are truncated, corrupt, or from another format version.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered during optimization.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace npi
