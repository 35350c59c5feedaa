#pragma once
#include <stdexcept>
#include <string>

namespace npl {

// Category hierarchy consumed by the CLI exit-code mapping:
// ConfigError -> 2, DataError family -> 3, NumericError family -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgumentError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// malformed or inconsistent inputs (files, dimensions, labels)
struct DataError : Error {
  using Error::Error;
};
struct IoError : DataError {
  using DataError::DataError;
};
struct DimensionError : DataError {
  using DataError::DataError;
};
struct ModelViolationError : DataError {
  using DataError::DataError;
};
struct InvalidSegmentationError : DataError {
  using DataError::DataError;
};
struct DegenerateDataError : DataError {
  using DataError::DataError;
};
struct InsufficientDataError : DataError {
  using DataError::DataError;
};
struct CapacityError : DataError {
  using DataError::DataError;
};

// failures arising during computation
struct NumericError : Error {
  using Error::Error;
};
struct DegenerateSupportError : NumericError {
  using NumericError::NumericError;
};
struct DegenerateStateError : NumericError {
  using NumericError::NumericError;
};
struct UndefinedDirectionError : NumericError {
  using NumericError::NumericError;
};

}  // namespace npl
