#pragma once

#include <stdexcept>
#include <string>

namespace lfsal {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/feature dimension mismatches. Messages name the offending axes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or command usage. The CLI maps these to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File reading/writing problems. Messages name the file.
class IoError : public Error {
 public:
  using Error::Error;
};

// Bookkeeping state problems (unknown sample id, missing logs).
class StateError : public Error {
 public:
  using Error::Error;
};

// Scene synthesis failures (object placement exhausted its retries).
class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace lfsal
