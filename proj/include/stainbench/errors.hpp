#pragma once

#include <stdexcept>
#include <string>

namespace stainbench {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor or parameter dimensions do not fit an operation's contract.
/// Messages name the offending dimension and the expected value.
struct ShapeError : Error {
    using Error::Error;
};

/// Invalid configuration value (CLI exit code 2).
struct ConfigError : Error {
    using Error::Error;
};

/// File system or image decode/encode failure (CLI exit code 3).
struct IoError : Error {
    using Error::Error;
};

/// Non-finite value where a finite one is required, e.g. NaN loss (CLI exit code 4).
struct NumericError : Error {
    using Error::Error;
};

}  // namespace stainbench
