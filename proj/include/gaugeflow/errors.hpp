#pragma once

#include <stdexcept>
#include <string>

namespace gaugeflow {

/// Base class of every error raised by the library. `kind()` lets callers
/// (the CLI in particular) map failures onto exit codes without RTTI games.
class Error : public std::runtime_error {
 public:
  enum class Kind { InvalidInput, Numerical };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct InvalidInput : Error {
  explicit InvalidInput(const std::string& what) : Error(Kind::InvalidInput, what) {}
};

struct NumericalFailure : Error {
  explicit NumericalFailure(const std::string& what) : Error(Kind::Numerical, what) {}
};

struct GroupMismatch : InvalidInput {
  GroupMismatch() : InvalidInput("operands belong to different groups") {}
};

struct CutLocusError : NumericalFailure {
  explicit CutLocusError(const std::string& what) : NumericalFailure(what) {}
};

struct ClosureViolation : NumericalFailure {
  explicit ClosureViolation(const std::string& what) : NumericalFailure(what) {}
};

struct ConvergenceFailure : NumericalFailure {
  explicit ConvergenceFailure(const std::string& what) : NumericalFailure(what) {}
};

struct CflViolation : InvalidInput {
  explicit CflViolation(const std::string& what) : InvalidInput(what) {}
};

}  // namespace gaugeflow
