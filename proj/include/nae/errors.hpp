// Copyright 2026 The NAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace nae {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters, shapes or configuration files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation's precondition (e.g. i == j for an interaction).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A theory builder could not realize the requested function.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// NaN or infinity detected; `stage()` names where it first appeared.
class NumericalError : public Error {
 public:
  NumericalError(std::string stage, const std::string& detail)
      : Error("numerical divergence in " + stage + ": " + detail), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace nae
