#pragma once

#include <stdexcept>
#include <string>

namespace pw {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mismatched resolutions or tensor shapes.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A value violates a type invariant (intrinsics, pose, colour range, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Scale alignment could not be posed (empty overlap).
class AlignmentError : public Error {
public:
    using Error::Error;
};

/// Input is well-formed but carries too little information (all-invalid rows, degenerate geometry).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Malformed or unsupported file content.
class FormatError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf encountered during optimisation.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace pw
