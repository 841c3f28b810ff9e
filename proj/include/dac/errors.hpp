#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dac {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed argument: wrong shape, non-finite value, out-of-range parameter.
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// Target class index outside 0..k-1 (the abstention class is not a valid target).
class InvalidTargetError : public Error {
public:
    using Error::Error;
};

/// Abstention mass reached 1 within tolerance; loss/gradient evaluation refuses
/// to continue so that saturation surfaces instead of propagating infinities.
class SaturationError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (bad dimensions, inconsistent schedule, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Scheduler operation called in the wrong phase (e.g. batch observation after
/// the warm-up window closed).
class SchedulerPhaseError : public Error {
public:
    using Error::Error;
};

/// Epochs presented to the scheduler out of order.
class SequencingError : public Error {
public:
    using Error::Error;
};

/// Non-finite gradient or parameter; training halts explicitly.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Cleaning removed every training sample.
class EmptyTrainingSetError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents. Carries the byte offset where parsing stopped.
class ParseError : public IoError {
public:
    ParseError(const std::string& msg, std::size_t byte_offset)
        : IoError(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}

    std::size_t offset;
};

/// File carries an unsupported format version.
class VersionError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace dac
