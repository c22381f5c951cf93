#pragma once

#include <stdexcept>
#include <string>

namespace certbox {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A domain-type invariant or an operation precondition was violated.
struct ValidationError : Error {
    using Error::Error;
};

/// Reciprocal of an interval whose lower endpoint is not strictly positive.
struct NonPositiveDenominator : Error {
    using Error::Error;
};

/// Malformed model, bounds, dataset or report file.
struct ParseError : Error {
    using Error::Error;
};

/// Tensor or layer dimensions do not compose.
struct ShapeMismatch : Error {
    using Error::Error;
};

struct UnsupportedLayer : Error {
    using Error::Error;
};

/// Bounds record with lower > upper or inconsistent corner ordering.
struct InvalidBounds : Error {
    using Error::Error;
};

/// Clamping emptied a perturbation interval. Reserved: cannot occur for the
/// built-in perturbation kinds.
struct EmptyDomain : Error {
    using Error::Error;
};

struct EmptySelection : Error {
    using Error::Error;
};

struct MissingExternalBounds : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace certbox
