#pragma once

#include <stdexcept>
#include <string>

namespace oac {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Configuration or model construction problem (dimension mismatch,
/// parameter out of range, malformed JSON field, ...).
struct ConfigError : Error {
    using Error::Error;
};

/// The base graph of a sampled sequence is not connected.
struct BaseDisconnected : Error {
    using Error::Error;
};

/// A generated window failed joint-connectivity certification after
/// exhausting the retry budget.
struct CertificationFailed : Error {
    using Error::Error;
};

/// A transmitting agent holds a negative state and the negativity
/// policy is set to abort.
struct NegativeStateUnderAbortPolicy : Error {
    using Error::Error;
};

/// A step-size schedule failed admissibility validation where an
/// admissible schedule is a precondition.
struct InadmissibleSchedule : Error {
    using Error::Error;
};

/// Matrix handed to a symmetric eigensolver is not symmetric.
struct NotSymmetric : Error {
    using Error::Error;
};

} // namespace oac
