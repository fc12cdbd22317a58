#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nmln {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A constant, predicate or atom does not belong to the signature in use.
class SignatureMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf in a score, potential or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A model used in a mode it does not support (e.g. symmetric evaluation of
/// a model that carries embeddings).
class ModeError : public Error {
 public:
  using Error::Error;
};

/// Exact enumeration requested on a domain that is too large.
class DomainTooLarge : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(line == 0 ? message : "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Serialized model does not match the signature or container version.
class ModelFormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace nmln
