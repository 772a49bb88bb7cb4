// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mmt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or dimension disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Token, language or parameter index outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Violated call precondition (non-scalar loss, empty input, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A metric that cannot be computed from the given input.
class Undetermined : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Parameter-group labeling or frozen-parameter integrity violation.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible checkpoint / corpus file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File-system failure; the message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmt
