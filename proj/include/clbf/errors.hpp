// Copyright (c) clbf contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace clbf {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Log of a non-positive value or division by zero (point or interval).
struct DomainError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

/// Problem or certificate file is malformed or violates an ingestion invariant.
struct SpecError : Error {
    using Error::Error;
};

struct ResourceExhausted : Error {
    using Error::Error;
};

struct DegenerateGradient : Error {
    using Error::Error;
};

struct LocalCheckFailed : Error {
    using Error::Error;
};

struct EmptySafeSet : Error {
    using Error::Error;
};

struct ControlUndefined : Error {
    using Error::Error;
};

struct NumericBlowup : Error {
    using Error::Error;
};

struct UnsupportedDimension : Error {
    using Error::Error;
};

}  // namespace clbf
