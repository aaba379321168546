#pragma once

#include <stdexcept>
#include <string>

namespace todcsp {

// Base of every error the library throws. The C API maps each subclass onto
// a status code (see todcsp.h).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (exit status 2).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad arguments or options (exit status 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Solution count is not exact enough for what was asked (exit status 3).
class CapError : public Error {
 public:
  using Error::Error;
};

// LLM endpoint could not be reached or refused the request (exit status 4).
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace todcsp
