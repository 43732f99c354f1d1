#pragma once

#include <stdexcept>
#include <string>

namespace hqmpc {

/// Malformed or inconsistent input (dimensions, non-finite values, schema violations).
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factorization or integration broke down.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The prioritized IK diverged while building a nominal trajectory.
class NominalInfeasible : public std::runtime_error {
 public:
  NominalInfeasible(int step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// A receding-horizon subproblem could not be solved.
class SubproblemFailure : public std::runtime_error {
 public:
  SubproblemFailure(int subproblem, const std::string& what)
      : std::runtime_error(what), subproblem_(subproblem) {}
  int subproblem() const { return subproblem_; }

 private:
  int subproblem_;
};

}  // namespace hqmpc
