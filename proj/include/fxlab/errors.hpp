#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fxlab {

// Base of every error the library throws. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ScheduleBoundsError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller-supplied function broke its documented contract (e.g. an
// asymmetric similarity).
class ContractError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced during sampling; `step` is the diffusion step.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int step)
      : Error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// Training diverged; `step` is the optimizer step at which it was detected.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t step)
      : Error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace fxlab
