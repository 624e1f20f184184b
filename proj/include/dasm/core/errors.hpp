// Copyright 2026 The DASM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dasm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is out of its admissible range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied data violates an operation's precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A softmax row has no unmasked position.
class DegenerateRowError : public Error {
 public:
  using Error::Error;
};

/// A function under evaluation produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Files or records fail schema or consistency validation. The CLI maps
/// this family to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint and a query store (or similar pair) disagree.
class CompatibilityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace dasm
