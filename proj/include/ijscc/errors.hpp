#pragma once

#include <stdexcept>
#include <string>

namespace ijscc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameters or mismatched channel counts.
struct ConfigError : Error {
  using Error::Error;
};

// Tensor shape violations at op boundaries.
struct ShapeError : Error {
  using Error::Error;
};

// Malformed artifact bytes, image files, or config files.
struct ParseError : Error {
  using Error::Error;
};

// Requested bandwidth budget cannot accommodate any candidate.
struct BudgetError : Error {
  using Error::Error;
};

// Training loss blew past the divergence guard.
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace ijscc
