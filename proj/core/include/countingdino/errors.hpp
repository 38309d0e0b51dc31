#pragma once

#include <stdexcept>
#include <string>

namespace cdino {

/// Base class for every error raised by the counting library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File does not look like the expected format (bad magic, version, header).
class FormatError : public Error {
public:
    using Error::Error;
};

/// File has the right format but its payload is truncated or oversized.
class CorruptionError : public Error {
public:
    using Error::Error;
};

/// Data violates a value invariant (non-finite values, zero dims, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Tensor or grid dimensions disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A box is empty or falls outside the grid it is mapped onto.
class GeometryError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

/// The similarity map carries no usable signal. Subclassed so callers can
/// apply a single policy to both flavours.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Similarity map is constant (max == min).
class DegenerateMapError : public DegenerateError {
public:
    using DegenerateError::DegenerateError;
};

/// Exemplar regions carry (almost) no response after minmax.
class DegenerateNormalizationError : public DegenerateError {
public:
    using DegenerateError::DegenerateError;
};

class EvaluationError : public Error {
public:
    using Error::Error;
};

}  // namespace cdino
