#pragma once

#include <stdexcept>
#include <string>

namespace fdrl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad inputs: malformed files, out-of-range labels, incompatible data.
struct ValidationError : Error {
  using Error::Error;
};

// Shape disagreement between operands.
struct DimensionError : ValidationError {
  using ValidationError::ValidationError;
};

// Bad run configuration (negative trade-offs, d not divisible by heads, ...).
struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Non-finite values encountered at run time.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace fdrl
