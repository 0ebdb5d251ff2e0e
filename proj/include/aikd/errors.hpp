#pragma once

#include <stdexcept>
#include <string>

namespace aikd {

// Base of all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Errors caused by user-supplied inputs (bad files, bad config). The CLI
// maps these to exit code 2; everything else is an internal error (exit 1).
struct UserError : Error {
    using Error::Error;
};

struct IoError : UserError {
    using UserError::UserError;
};

struct ParseError : UserError {
    using UserError::UserError;
};

struct ValidationError : UserError {
    using UserError::UserError;
};

struct ConfigError : UserError {
    using UserError::UserError;
};

// Checkpoint file problems: unsupported version, truncation, corruption.
struct CheckpointError : UserError {
    using UserError::UserError;
};

struct DegenerateLabelsError : UserError {
    using UserError::UserError;
};

// Source landmarks (nearly) collinear; similarity fit is unstable.
struct DegenerateGeometryError : Error {
    using Error::Error;
};

// Zero-norm embedding; cosine similarity undefined.
struct DegenerateEmbeddingError : Error {
    using Error::Error;
};

struct FrozenModelError : Error {
    using Error::Error;
};

// Shape or precondition violation between library components.
struct ContractError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

}  // namespace aikd
