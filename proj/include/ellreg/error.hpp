#pragma once

#include <stdexcept>
#include <string>

namespace ellreg {

/// Operand dimensions do not agree.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Value outside the mathematical domain of an operation (e.g. a target row
/// that is not a probability vector under cross-entropy).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Caller violated a documented precondition.
struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf reached a public boundary.
struct NonFiniteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed text input (checkpoints, CSV, config files).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace ellreg
