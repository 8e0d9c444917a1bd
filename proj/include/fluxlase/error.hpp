#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fluxlase {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (k < 0, ω below the band edge, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A data invariant was violated on input (occupation outside [0,1], length mismatch, ...).
class InvariantError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or parameter set. `key` names the offending entry when known.
class ConfigError : public Error {
public:
    explicit ConfigError(std::string what, std::string key = {})
        : Error(std::move(what)), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Failure of a numerical procedure on otherwise valid input.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularSystemError : public NumericalError {
public:
    SingularSystemError(const std::string& what, double rcond)
        : NumericalError(what + " (reciprocal condition estimate " + std::to_string(rcond) + ")"),
          rcond_(rcond) {}
    double rcond() const noexcept { return rcond_; }

private:
    double rcond_;
};

class NoConvergenceError : public NumericalError {
public:
    NoConvergenceError(const std::string& what, double residual)
        : NumericalError(what + " (last residual " + std::to_string(residual) + ")"),
          residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Newton iterate left the open interval (0,1) in occupation.
class BracketError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class CalibrationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// NaN/Inf appeared during time integration. Carries the last finite state.
class NonFiniteError : public NumericalError {
public:
    NonFiniteError(const std::string& what, double t, std::vector<double> last_good)
        : NumericalError(what + " at t=" + std::to_string(t) + " fs"), t_(t),
          last_good_(std::move(last_good)) {}
    double time() const noexcept { return t_; }
    const std::vector<double>& last_good() const noexcept { return last_good_; }

private:
    double t_;
    std::vector<double> last_good_;
};

}  // namespace fluxlase
