#pragma once

#include <stdexcept>
#include <string>

namespace ddx {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (ontology, cohort, config, weights).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Input parsed but violates a structural rule.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (masked action, bad index, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ChannelError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ddx
