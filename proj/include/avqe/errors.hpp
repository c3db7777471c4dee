#pragma once

#include <stdexcept>
#include <string>

namespace avqe {

// Input, file and content problems. The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failures: singular systems, non-finite objectives, undefined
// statistics. The CLI maps these to exit code 3.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Model-file failures, kept distinct so callers can tell an outdated file
// from a corrupt one. All are DataError (exit code 2).
class ModelVersionError : public DataError {
public:
    using DataError::DataError;
};

class ModelFormatError : public DataError {
public:
    using DataError::DataError;
};

class ModelShapeError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace avqe
