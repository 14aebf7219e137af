#pragma once

#include <stdexcept>
#include <string>

namespace ssgdlab {

// Exit-code mapping used by the CLI: 2 config/usage, 3 data, 4 numeric.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

// Invalid configuration: bad spec values, unknown keys, malformed requests.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

// API misuse: precondition violations, stale traces, missing log entries.
class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

// Malformed or truncated input data (dataset files, checkpoints, payloads).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

// Non-finite values or numerically undefined operations.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 4; }
};

}  // namespace ssgdlab
