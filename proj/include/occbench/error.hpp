#pragma once

#include <stdexcept>
#include <string>

namespace occbench {

// Base of all toolkit errors. The CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a schema, precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File system or codec failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// A well-formed request that cannot be carried out (e.g. an unreachable
// occlusion target, a joint decoded behind the camera).
class ComputeError : public Error {
 public:
  using Error::Error;
};

}  // namespace occbench
