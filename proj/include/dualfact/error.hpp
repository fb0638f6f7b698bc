#pragma once

#include <stdexcept>
#include <string>

namespace dualfact {

// Base for every error raised by the library. Callers that only need to
// distinguish "ours" from std failures catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition of an operation was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Input data (files, records, fact strings) does not follow its schema.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A backend could not be reached or answered with a transport-level failure.
class TransportError : public Error {
 public:
  using Error::Error;
};

// A metric is mathematically undefined for the given input.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace dualfact
