#pragma once

#include <stdexcept>
#include <string>

namespace fot {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Mismatched matrix/vector/basis dimensions.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// Evaluation point outside the natural domain of a basis.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// Invalid hyperparameter or kernel parameter.
class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& msg) : Error(msg) {}
};

/// Input data violates a structural invariant (non-symmetric kernel,
/// negative spectrum, non-increasing design points, ...).
class ValidityError : public Error {
public:
    explicit ValidityError(const std::string& msg) : Error(msg) {}
};

/// An iterative solver diverged or could not proceed; message carries
/// diagnostics (residual history, iteration count).
class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& msg) : Error(msg) {}
};

/// File read/write failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Malformed file contents; message names the offending location.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

} // namespace fot
