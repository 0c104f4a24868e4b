// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace msdnet {

/// Base of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or extents.
class DimensionError : public Error
{
public:
  using Error::Error;
};

/// Invalid argument value (stride, axis, empty list, ...).
class ArgumentError : public Error
{
public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

/// Episode sampling could not satisfy its preconditions.
class SamplingError : public Error
{
public:
  using Error::Error;
};

/// Evaluation would mix training and test classes.
class ProtocolError : public Error
{
public:
  using Error::Error;
};

class IoError : public Error
{
public:
  using Error::Error;
};

/// Malformed file content. Carries the byte offset where parsing stopped.
class ParseError : public Error
{
public:
  ParseError(std::string const &what, std::size_t offset)
    : Error(what + " (at byte offset " + std::to_string(offset) + ")")
    , detail_(what)
    , offset_(offset)
  {
  }

  std::size_t        offset() const { return offset_; }
  /// Message without the offset suffix.
  std::string const &detail() const { return detail_; }

private:
  std::string detail_;
  std::size_t offset_;
};

} // namespace msdnet
