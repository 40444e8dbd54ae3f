#pragma once

#include <stdexcept>
#include <string>

namespace vigil {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Schema or data-model violation (manifest records, annotations, reports).
class ValidationError : public Error {
public:
  using Error::Error;
};

// Bad configuration detected before any backend call.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Mathematically degenerate input, e.g. cosine of a zero vector.
class DegenerateInputError : public Error {
public:
  using Error::Error;
};

// Backend could not be reached or answered with a server-side failure.
// Retryable.
class TransportError : public Error {
public:
  using Error::Error;
};

// Backend answered, but the answer is outside the wire contract.
// Never retried; the raw payload is kept for diagnostics.
class ProtocolError : public Error {
public:
  ProtocolError(const std::string& what, std::string raw = {})
      : Error(what), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

private:
  std::string raw_;
};

}  // namespace vigil
