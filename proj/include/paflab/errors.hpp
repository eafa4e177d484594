#pragma once

#include <stdexcept>
#include <string>

namespace paflab {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible. The message names both shapes.
class DimensionError : public Error {
  public:
    using Error::Error;
};

/// A configuration violates its invariants (bad head count, zero depth, ...).
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Caller-supplied data is out of range (token ids, targets, sequence length).
class InputError : public Error {
  public:
    using Error::Error;
};

/// An API precondition was violated by the caller.
class ContractError : public Error {
  public:
    using Error::Error;
};

/// A measurement is undefined for this input (zero-norm rows, zero input norm).
class DegenerateInputError : public Error {
  public:
    using Error::Error;
};

class CorruptCheckpointError : public Error {
  public:
    using Error::Error;
};

class IoError : public Error {
  public:
    using Error::Error;
};

}  // namespace paflab
