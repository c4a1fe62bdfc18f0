// Copyright (C) 2026 the atmlab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace atmlab {

/// Base class for all atmlab failures.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Incompatible matrix shapes. Messages name both shapes.
struct DimensionError : Error {
    using Error::Error;
};

/// Task index outside the memory bank's range.
struct RoutingError : Error {
    using Error::Error;
};

/// Operation not valid in the current state (frozen bank, wrong stage).
struct StateError : Error {
    using Error::Error;
};

/// Caller violated an API precondition.
struct ContractError : Error {
    using Error::Error;
};

/// Non-finite value produced where finiteness is required. CLI exit 3.
struct NumericError : Error {
    using Error::Error;
};

/// Malformed config file or override. CLI exit 2.
struct ConfigError : Error {
    using Error::Error;
};

/// File I/O failure or corrupt on-disk data. CLI exit 4.
struct IoError : Error {
    using Error::Error;
};

}  // namespace atmlab
