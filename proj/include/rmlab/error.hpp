#pragma once

#include <stdexcept>
#include <string>

namespace rmlab {

// Error taxonomy mirrored by the CLI exit codes: ConfigError -> 2,
// DataError -> 3, NumericError -> 4, anything else -> 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent configuration (bad flag value, malformed config
// file, incompatible knob combination).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or insufficient input data (bad JSONL record, empty split,
// missing label).
struct DataError : Error {
  using Error::Error;
};

// Non-finite values or numerically impossible requests detected at runtime.
struct NumericError : Error {
  using Error::Error;
};

// Tensor shape mismatch. A programming or wiring error, not a user error.
struct ShapeError : Error {
  using Error::Error;
};

}  // namespace rmlab
