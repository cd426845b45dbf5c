#pragma once

#include <stdexcept>
#include <string>

namespace vpcc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// A variance form that should be positive semidefinite is not, beyond
/// round-off. This signals a bug in the moment algebra rather than bad input.
class NotPSD : public Error {
public:
    using Error::Error;
};

class MomentUndefined : public Error {
public:
    using Error::Error;
};

class SamplerMissing : public Error {
public:
    using Error::Error;
};

/// The current input sequence cannot be certified with the available risk budget.
class AllocationInfeasible : public Error {
public:
    using Error::Error;
};

/// A modelling assumption the caller must attest to was not attested.
class AssumptionNotAttested : public Error {
public:
    using Error::Error;
};

/// Problem configuration could not be parsed or validated. `path()` is a JSON
/// pointer to the offending field.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace vpcc
