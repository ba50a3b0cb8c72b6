#pragma once

#include <stdexcept>
#include <string>

namespace stylecloak {

// Error taxonomy shared by the library and the CLI. Each type maps to a
// distinct failure class so batch drivers can report per-item causes.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File could not be read or decoded as a supported raster format.
struct DecodeError : Error {
    using Error::Error;
};

// Filesystem write/read failure.
struct IoError : Error {
    using Error::Error;
};

// An argument violates an operation precondition (shape, channel count,
// signed/unsigned usage, non-finite values).
struct InvalidInputError : Error {
    using Error::Error;
};

// A configuration knob is out of its valid range.
struct InvalidParameterError : Error {
    using Error::Error;
};

// Encoder weights missing or malformed.
struct LoadError : Error {
    using Error::Error;
};

// Style distance norm fell below the guard threshold: the image is already
// content-like and protection is vacuous.
struct DegenerateStyleError : Error {
    using Error::Error;
};

// Optimization produced a non-finite loss.
struct DivergedError : Error {
    DivergedError(const std::string& msg, int step_index)
        : Error(msg), step(step_index) {}
    int step;
};

}  // namespace stylecloak
