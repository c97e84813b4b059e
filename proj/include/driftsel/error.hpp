#ifndef DRIFTSEL_ERROR_HPP
#define DRIFTSEL_ERROR_HPP

#include <stdexcept>
#include <string>

namespace driftsel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid model or algorithm parameter (population size, selection coefficient, alpha, ...).
class ParameterError : public Error {
  public:
    using Error::Error;
};

/// Invalid user configuration (thresholds, ranges, config files).
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Unreadable or malformed input file.
class LoadError : public Error {
  public:
    using Error::Error;
};

/// Scaling constant could not be estimated.
class EstimationError : public Error {
  public:
    using Error::Error;
};

/// A series is too small or otherwise unusable for the requested operation.
class SeriesError : public Error {
  public:
    using Error::Error;
};

class TrainingError : public Error {
  public:
    using Error::Error;
};

class ModelFormatError : public Error {
  public:
    using Error::Error;
};

} // namespace driftsel

#endif
