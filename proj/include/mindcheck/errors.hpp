#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mindcheck {

/// Base of every error the engine throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CatalogError : public Error {
 public:
  using Error::Error;
};

/// A model reply did not match the expected output grammar.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

// Backend failures. Only TransportError and TimeoutError are retried.
class BackendError : public Error {
 public:
  using Error::Error;
};

class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

class TimeoutError : public BackendError {
 public:
  using BackendError::BackendError;
};

class AuthError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Scripted backend has no entry that fits the request.
class ScriptError : public BackendError {
 public:
  using BackendError::BackendError;
};

class PersistenceError : public Error {
 public:
  using Error::Error;
};

/// A bounded policy (guide counts, attempt limits) would be exceeded.
class PolicyError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  DatasetError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace mindcheck
