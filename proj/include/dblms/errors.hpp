#pragma once

#include <stdexcept>
#include <string>

namespace dblms {

/// Invalid structural parameters, block lengths or configuration values.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A step size at or beyond the stability bound was handed to a steady-state
/// predictor. Carries the computed bound so callers can report it.
class OutOfBoundError : public std::domain_error {
 public:
  OutOfBoundError(double step, double bound)
      : std::domain_error("effective step size " + std::to_string(step) +
                          " is outside the stability bound " +
                          std::to_string(bound)),
        step_(step),
        bound_(bound) {}

  double step() const noexcept { return step_; }
  double bound() const noexcept { return bound_; }

 private:
  double step_;
  double bound_;
};

/// The transient model predicts no convergence (decay ratio outside (0,1)).
class PredictedDivergenceError : public std::domain_error {
 public:
  PredictedDivergenceError(double ratio)
      : std::domain_error("geometric decay ratio " + std::to_string(ratio) +
                          " lies outside (0, 1)"),
        ratio_(ratio) {}

  double ratio() const noexcept { return ratio_; }

 private:
  double ratio_;
};

/// Normal equations could not be solved reliably.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double condition)
      : std::runtime_error(what + " (condition estimate " +
                           std::to_string(condition) + ")"),
        condition_(condition) {}

  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// Every trial of an ensemble diverged; there is nothing to average.
class EnsembleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dblms
