#pragma once

#include <stdexcept>
#include <string>

namespace homog {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs are malformed or violate a declared modelling assumption.
/// The CLI maps these to exit code 1.
class InputError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed. The CLI maps these to exit code 2.
class SolverError : public Error {
public:
    using Error::Error;
};

class MismatchedModule : public InputError {
public:
    MismatchedModule() : InputError("trig polynomials live on different frequency modules") {}
};

class ZeroSpatialFrequency : public InputError {
public:
    using InputError::InputError;
};

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

class AssumptionViolation : public InputError {
public:
    AssumptionViolation(std::string clause, const std::string& what)
        : InputError(clause + ": " + what), clause_(std::move(clause)) {}
    [[nodiscard]] const std::string& clause() const noexcept { return clause_; }

private:
    std::string clause_;
};

class SingularSystem : public SolverError {
public:
    SingularSystem(const std::string& what, double rcond)
        : SolverError(what + " (reciprocal condition estimate " + std::to_string(rcond) + ")"),
          rcond_(rcond) {}
    [[nodiscard]] double rcond() const noexcept { return rcond_; }

private:
    double rcond_;
};

class TruncationOverflow : public SolverError {
public:
    using SolverError::SolverError;
};

class NoConvergence : public SolverError {
public:
    using SolverError::SolverError;
};

class Blowup : public SolverError {
public:
    using SolverError::SolverError;
};

class StiffnessRejected : public SolverError {
public:
    using SolverError::SolverError;
};

}  // namespace homog
