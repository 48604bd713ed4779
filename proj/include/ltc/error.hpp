// Copyright 2026 The ltc-rerank Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ltc {

/// Base for every error raised by the engine. The C API maps each subclass
/// onto a status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside the domain of the operation.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Model / compression / pipeline configuration is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Token input rejected (empty, out-of-vocabulary, too long).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content; carries the file and 1-based line number.
class FormatError : public Error {
 public:
  FormatError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what), path_(path), line_(line) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values (diverged training, NaN scores).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ltc
