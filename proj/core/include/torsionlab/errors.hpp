#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace torsionlab {

/// Non-positive length, negative temperature, and similar out-of-domain inputs.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (non-convergence, degenerate data, bad conditioning).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, std::vector<std::string> trace = {})
      : std::runtime_error(what), trace_(std::move(trace)) {}

  const std::vector<std::string>& trace() const noexcept { return trace_; }

 private:
  std::vector<std::string> trace_;
};

/// Fit-specific failure. `kind` lets callers distinguish the precondition that broke.
class FitError : public NumericalError {
 public:
  enum class Kind { kDegenerate, kInsufficientData, kInfeasible, kNonConvergence, kIllConditioned };

  FitError(Kind kind, const std::string& what, std::vector<std::string> trace = {})
      : NumericalError(what, std::move(trace)), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// The closed feedback loop diverged or failed its pre-run step-response check.
class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario configuration problems: parse errors, unit mismatches, unknown keys.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, int line = 0, int column = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", column " +
                                          std::to_string(column) + ": " + what
                                    : what),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace torsionlab
