// Copyright 2026 The Cranio Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace cranio {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. Carries the path and the line (text formats) or
/// byte offset (binary formats) where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(std::string path, std::size_t location, bool is_line, const std::string& what)
      : Error(path + (is_line ? ":" : "@") + std::to_string(location) + ": " + what),
        path_(std::move(path)),
        location_(location),
        is_line_(is_line) {}

  const std::string& path() const { return path_; }
  std::size_t location() const { return location_; }
  bool is_line() const { return is_line_; }

 private:
  std::string path_;
  std::size_t location_;
  bool is_line_;
};

/// A precondition on the arguments of an operation does not hold.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: NaN, divergence, non-convergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cranio
