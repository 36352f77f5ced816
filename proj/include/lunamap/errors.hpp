#pragma once

#include <stdexcept>
#include <string>

namespace lunamap {

// Operands with incompatible dimensions (series shapes, vector lengths).
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// An iterative solver failed to reach its tolerance.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The constraint Jacobian lost rank: a second family is branching off here.
struct BifurcationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A least-squares fit did not reach the requested quality.
struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace lunamap
