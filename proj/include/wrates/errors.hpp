#pragma once

#include <stdexcept>
#include <string>

namespace wrates {

// Error taxonomy shared across the library. Everything derives from
// wrates::Error so callers can catch one type at the CLI boundary.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// a measure violated its invariants (negative weight, duplicate support
// index, zero total mass, mismatched sizes)
struct InvalidMeasure : Error {
  using Error::Error;
};

// two objects live on incompatible spaces (different dimension or
// different underlying space where identity is required)
struct DimensionMismatch : Error {
  using Error::Error;
};

// a bound was evaluated outside the parameter regime where it holds;
// thrown only when the caller asked for a hard failure, otherwise the
// bound result carries an `applicable` flag instead
struct InapplicableRegime : Error {
  using Error::Error;
};

// an iterative routine failed to reach its tolerance
struct ConvergenceFailure : Error {
  using Error::Error;
};

// a numeric inversion or table lookup was asked for a value outside the
// covered range
struct RangeError : Error {
  using Error::Error;
};

// malformed input file or config
struct ParseError : Error {
  using Error::Error;
};

// experiment harness failure (too many replicate failures, bad config)
struct ExperimentError : Error {
  using Error::Error;
};

}  // namespace wrates
