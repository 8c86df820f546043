#pragma once

#include <stdexcept>
#include <string>

namespace leo {

/// Base class for every error raised by the library. `kind()` is the short
/// machine-readable tag the CLI prints on failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept = 0;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

class IngestionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ingestion"; }
};

}  // namespace leo
