#pragma once

#include <stdexcept>
#include <string>

namespace nmpcmc {

/// Matrix/vector dimensions do not conform for the requested operation.
struct DimensionMismatch : std::invalid_argument {
    explicit DimensionMismatch(const std::string& what) : std::invalid_argument(what) {}
};

/// A Cholesky pivot was non-positive: the matrix is not positive definite.
/// Signals an indefinite covariance or Hessian; the caller decides recovery.
struct NotPositiveDefinite : std::runtime_error {
    explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

/// A state or iterate contains NaN/Inf (model blow-up).
struct NonFiniteState : std::runtime_error {
    explicit NonFiniteState(const std::string& what) : std::runtime_error(what) {}
};

/// Model evaluation outside its domain (e.g. non-positive temperature).
struct DomainError : std::domain_error {
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// Two trajectories that must have equal length do not.
struct LengthMismatch : std::invalid_argument {
    explicit LengthMismatch(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace nmpcmc
