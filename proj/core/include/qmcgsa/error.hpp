#pragma once

#include <stdexcept>
#include <string>

namespace qmcgsa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. Φ⁻¹ of 1.5).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration: missing instrument parameter,
/// bad method/N combination, unparsable config file.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Requested Sobol' dimension is larger than the loaded direction table.
class UnsupportedDimension : public Error {
public:
    using Error::Error;
};

/// Sequence counter would leave the representable index range.
class CounterOverflow : public Error {
public:
    using Error::Error;
};

/// Finite-difference shift too large for the bumped parameter (σ − h ≤ 0).
class ShiftTooLarge : public Error {
public:
    using Error::Error;
};

/// A reference value needed by an experiment is not available.
class MissingReference : public Error {
public:
    using Error::Error;
};

/// Non-finite or degenerate numerical result.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace qmcgsa
