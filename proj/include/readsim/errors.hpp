#pragma once

#include <stdexcept>
#include <string>

namespace readsim {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Scoring
class IncompleteReading : public Error {
 public:
  using Error::Error;
};
class MissingBatchContext : public Error {
 public:
  using Error::Error;
};
class EmptyPool : public Error {
 public:
  using Error::Error;
};

// Readers
class InvalidMatrix : public Error {
 public:
  using Error::Error;
};
class Unachievable : public Error {
 public:
  using Error::Error;
};

// Cohort calibration
class CalibrationFailed : public Error {
 public:
  using Error::Error;
};

// Analysis
class EmptyInput : public Error {
 public:
  using Error::Error;
};
class InsufficientData : public Error {
 public:
  using Error::Error;
};
class MissingVisit : public Error {
 public:
  using Error::Error;
};
class UnsortedEdges : public Error {
 public:
  using Error::Error;
};

// App
class ParseError : public Error {
 public:
  using Error::Error;
};
class ValidationError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace readsim
