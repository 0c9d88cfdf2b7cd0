// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace groklab {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes incompatible with the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A token id, label, or parameter path that does not exist.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument outside its documented domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An API contract violation (wrong call sequence, wrong tensor kind).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content; the message carries the line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace groklab
