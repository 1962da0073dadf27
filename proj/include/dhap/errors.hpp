#pragma once

#include <stdexcept>
#include <string>

namespace dhap {

/// Base class for all recoverable numerical failures in the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A model vector field produced a non-finite component.
struct ModelError : Error {
    using Error::Error;
};

/// A fixed-step integrator hit a non-finite stage value.
struct IntegrationError : Error {
    using Error::Error;
};

/// The Kalman filter covariance blew up or an innovation variance collapsed.
struct FilterError : Error {
    using Error::Error;
};

/// The OCP solver failed; the caller is expected to fall back to open loop.
struct SolverError : Error {
    using Error::Error;
};

/// Parameter estimation failed from every start point.
struct EstimationError : Error {
    using Error::Error;
};

/// Malformed configuration or data file.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace dhap
