#pragma once

#include <stdexcept>
#include <string>

namespace kneadlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// numerics
class SignUndecidable : public Error {
 public:
  using Error::Error;
};
class NoSignChange : public Error {
 public:
  using Error::Error;
};

// symbolic
class InvalidSequence : public Error {
 public:
  using Error::Error;
};
class ShiftOfCritical : public Error {
 public:
  using Error::Error;
};

// families
class ParamOutOfRange : public Error {
 public:
  using Error::Error;
};
class NearCritical : public Error {
 public:
  using Error::Error;
};

// orbits
class AmbiguousSymbol : public Error {
 public:
  AmbiguousSymbol(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};
class NotFound : public Error {
 public:
  using Error::Error;
};
class NotAdmissible : public Error {
 public:
  using Error::Error;
};
class NotRealizable : public Error {
 public:
  using Error::Error;
};
class BranchDead : public Error {
 public:
  using Error::Error;
};

// paramsearch
class OrderViolation : public Error {
 public:
  using Error::Error;
};
class BracketLost : public Error {
 public:
  using Error::Error;
};
class ParityViolation : public Error {
 public:
  using Error::Error;
};
class NotMinimal : public Error {
 public:
  using Error::Error;
};

// construct
class BootstrapFailed : public Error {
 public:
  using Error::Error;
};
class StepFailed : public Error {
 public:
  StepFailed(std::string reason, const std::string& what)
      : Error(what), reason_(std::move(reason)) {}
  const std::string& reason() const { return reason_; }

 private:
  std::string reason_;
};

// persistence
class SchemaVersionMismatch : public Error {
 public:
  using Error::Error;
};
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace kneadlab
