#pragma once

#include <stdexcept>
#include <string>

namespace combwdm {

// Base of every error raised by the library. Stage runners catch this type
// to attach channel/sweep context before rethrowing.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class InvalidModel : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class FitDegenerate : public Error {
public:
    using Error::Error;
};

class NoCrossing : public Error {
public:
    using Error::Error;
};

class ApproximationInvalid : public Error {
public:
    using Error::Error;
};

class GridMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class UnreliableEstimate : public Error {
public:
    using Error::Error;
};

class LockFailure : public Error {
public:
    using Error::Error;
};

class EqualizerSingularity : public Error {
public:
    using Error::Error;
};

class AlignmentFailure : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Runtime failure of a simulation stage or of result output.
class StageError : public Error {
public:
    using Error::Error;
};

namespace detail {

template <class E = ValidationError>
inline void require(bool condition, const std::string& message)
{
    if (!condition) throw E(message);
}

} // namespace detail

} // namespace combwdm
