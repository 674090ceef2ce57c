#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace alphamcts {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV rows, config lines). `line` is 1-based, 0 if unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Two records claim the same (date, symbol) cell.
class ConflictError : public Error {
 public:
  ConflictError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class InvalidHorizon : public Error {
 public:
  using Error::Error;
};

/// The formula interchange document cannot be turned into a tree.
class InterchangeError : public Error {
 public:
  using Error::Error;
};

/// A metric has no qualifying observations (all warm-up, zero variance, ...).
class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

/// Every argument set of a formula produced an unusable alpha matrix.
class NoValidConfiguration : public Error {
 public:
  using Error::Error;
};

/// The generator could not produce a valid formula within its repair budget.
class GenerationFailed : public Error {
 public:
  using Error::Error;
};

/// The generator backend is unreachable after retries.
class GeneratorUnavailable : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Transport-level failure talking to a chat endpoint. `transient` errors are retried.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, bool transient) : Error(what), transient_(transient) {}
  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

/// A replayed request does not match the recorded one.
class ReplayMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace alphamcts
