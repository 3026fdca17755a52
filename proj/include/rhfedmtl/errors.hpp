#pragma once

#include <stdexcept>
#include <string>

namespace rhfedmtl {

/// Shapes of models, duals and data disagree.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A mathematical invariant failed at runtime (e.g. negative duality gap).
/// Always indicates a bug in an evaluation path, never bad user input.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rhfedmtl
