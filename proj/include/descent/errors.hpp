#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace descent {

/// Base class of every failure the library reports by exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An evaluation produced an infinity or NaN.
class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

/// The eigensolver exhausted its sweep budget. Signals pathological input
/// or a bug; must not occur for finite symmetric input at moderate size.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

/// A step-size plan was requested with a non-positive bound.
class InvalidBound : public Error {
 public:
  using Error::Error;
};

/// A certification mode was requested that the map does not support.
class ModeUnsupported : public Error {
 public:
  using Error::Error;
};

/// An experiment or run configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Expression-text errors carry the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t position)
      : Error(message + " (at position " + std::to_string(position) + ")"),
        position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class SyntaxError : public ParseError {
 public:
  using ParseError::ParseError;
};

class UnknownVariable : public ParseError {
 public:
  UnknownVariable(const std::string& name, std::size_t position)
      : ParseError("unknown variable '" + name + "'", position), name_(name) {}

  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class NonIntegerExponent : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace descent
