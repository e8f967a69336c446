#pragma once

#include <stdexcept>
#include <string>

namespace saesteer {

// Root of every exception the library throws. Subclasses name the failure
// class so callers (notably the CLI) can map them onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class BufferNotReady : public Error {
 public:
  using Error::Error;
};

class DegenerateSamples : public Error {
 public:
  using Error::Error;
};

class UndefinedCosine : public Error {
 public:
  using Error::Error;
};

class UndefinedRSquared : public Error {
 public:
  using Error::Error;
};

}  // namespace saesteer
