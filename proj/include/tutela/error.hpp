#pragma once

#include <stdexcept>
#include <string>

namespace tutela {

// Base for every error raised by the engine. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input value outside an operation's domain (negative score inputs, empty corpus, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Missing or contradictory configuration (registry not loaded, bad synth config).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable stream, bad header, corrupt binary file.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace tutela
