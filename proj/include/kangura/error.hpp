#pragma once

#include <stdexcept>
#include <string>

namespace kangura {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid argument, shape mismatch, or precondition violation.
struct DomainError : Error {
    using Error::Error;
};

// Malformed input file; message carries filename and line number.
struct ParseError : Error {
    using Error::Error;
};

// Structurally valid file with out-of-range content (e.g. label >= class count).
struct SchemaError : Error {
    using Error::Error;
};

// Iterative method failed to reach its tolerance; message names the residual.
struct ConvergenceError : Error {
    using Error::Error;
};

// Checkpoint or other binary artifact could not be loaded.
struct LoadError : Error {
    using Error::Error;
};

// NaN/Inf detected at a pipeline stage boundary; message names the stage.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace kangura
