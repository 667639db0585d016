#pragma once

#include <stdexcept>
#include <string>

namespace portcast {

// Base of all library errors. The CLI maps the three broad categories to
// exit codes: ConfigError -> 2, DataError -> 3, DivergedLoss -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct DivergedLoss : Error {
    using Error::Error;
};

// market data
struct MissingColumn : DataError {
    using DataError::DataError;
};
struct NonPositivePrice : DataError {
    using DataError::DataError;
};
struct EmptyIntersection : DataError {
    using DataError::DataError;
};
struct EmptyRange : DataError {
    using DataError::DataError;
};
struct SeriesTooShort : DataError {
    using DataError::DataError;
};
struct InvalidSpec : ConfigError {
    using ConfigError::ConfigError;
};

// model / numerics
struct InvalidKernel : Error {
    using Error::Error;
};
struct ShapeMismatch : Error {
    using Error::Error;
};

// lora
struct UnknownTarget : ConfigError {
    using ConfigError::ConfigError;
};
struct RankTooLarge : ConfigError {
    using ConfigError::ConfigError;
};

// training / rl
struct EpisodeTooShort : DataError {
    using DataError::DataError;
};
struct ZeroTarget : DataError {
    using DataError::DataError;
};

// backtest
struct InsufficientHistory : DataError {
    using DataError::DataError;
};
struct LookaheadViolation : Error {
    using Error::Error;
};

// persistence
struct CheckpointMismatch : DataError {
    using DataError::DataError;
};
struct UnknownRun : ConfigError {
    using ConfigError::ConfigError;
};

}  // namespace portcast
