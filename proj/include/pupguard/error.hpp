#pragma once

#include <stdexcept>
#include <string>

namespace pupguard {

// Base for every error the library throws; callers that only care about
// "something went wrong" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed textual input (timestamps, manifests, embedding files, configs,
// model documents).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Argument outside the operation's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// t2 < t1 on a press pair.
class OrderingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A fit that cannot proceed on the given training data (e.g. zero timing
// variance).
class FitError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// One-class protocol violations: attack pairs in training data, unlabeled
// pairs in evaluation data.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

}  // namespace pupguard
