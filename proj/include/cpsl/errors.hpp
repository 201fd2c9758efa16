#pragma once

#include <stdexcept>
#include <string>

namespace cpsl {

/// Base of every engine error. `exitCode()` maps onto the CLI contract:
/// 2 input error, 3 constraint infeasible, 4 corrupt bundle.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exitCode() const { return 2; }
};

class InputError : public Error {
 public:
  using Error::Error;
};

/// A value violated a type invariant at construction time.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class DegenerateCameraError : public Error {
 public:
  using Error::Error;
};

class BehindCameraError : public Error {
 public:
  using Error::Error;
};

class NoValidDepthError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
  int exitCode() const override { return 3; }
};

class BudgetInfeasibleError : public InfeasibleError {
 public:
  using InfeasibleError::InfeasibleError;
};

class BundleError : public Error {
 public:
  using Error::Error;
  int exitCode() const override { return 4; }
};

class CorruptContainerError : public BundleError {
 public:
  using BundleError::BundleError;
};

class VersionMismatchError : public BundleError {
 public:
  using BundleError::BundleError;
};

class TruncatedStreamError : public BundleError {
 public:
  using BundleError::BundleError;
};

class CodecUnsupportedError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpsl
