#pragma once

// Dense least-squares building blocks shared by the calibration pipeline.

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace torsionlab::fit {

struct LinearFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;  // sigma^2 (A^T W A)^-1 with sigma^2 = rss / dof
  Eigen::VectorXd residuals;   // unweighted b - A x
  double rss = 0.0;            // weighted residual sum of squares
  int dof = 0;
  double condition_number = 0.0;  // of the column-scaled weighted design
};

/// Weighted linear least squares via column-pivoted QR on the column-scaled
/// design. `weights` multiplies each row (pass 1/sigma_i); empty means unit.
LinearFit linear_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs,
                               const Eigen::VectorXd& weights = {});

/// Lawson-Hanson non-negative least squares, min |A x - b| s.t. x >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs,
                     int max_iterations = 500);

struct Problem {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residuals;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
};

struct SolverOptions {
  int max_iterations = 100;
  double relative_step_tolerance = 1e-12;
};

struct SolverResult {
  Eigen::VectorXd parameters;
  double cost = 0.0;  // 1/2 |r|^2
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> trace;
  /// (J^T J)^-1 at the solution; multiply by rss/dof for a covariance.
  Eigen::MatrixXd normal_inverse;
};

/// Gauss-Newton with a backtracking (Armijo) line search.
SolverResult gauss_newton(const Problem& problem, Eigen::VectorXd x0, const SolverOptions& options = {});

/// Levenberg-Marquardt with multiplicative damping updates.
SolverResult levenberg_marquardt(const Problem& problem, Eigen::VectorXd x0,
                                 const SolverOptions& options = {});

}  // namespace torsionlab::fit
