#include "torsionlab/fitting.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "torsionlab/errors.hpp"

namespace torsionlab::fit {
namespace {

std::string trace_line(int iter, double cost, double step, double extra, const char* extra_name) {
  std::ostringstream os;
  os.precision(6);
  os << "iter " << iter << ": cost=" << cost << " rel_step=" << step << ' ' << extra_name << '='
     << extra;
  return os.str();
}

Eigen::MatrixXd normal_inverse(const Eigen::MatrixXd& jac) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  Eigen::VectorXd inv_s2(s.size());
  const double cutoff = s.size() > 0 ? s(0) * 1e-14 : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) inv_s2(i) = s(i) > cutoff ? 1.0 / (s(i) * s(i)) : 0.0;
  return svd.matrixV() * inv_s2.asDiagonal() * svd.matrixV().transpose();
}

double relative_step(const Eigen::VectorXd& step, const Eigen::VectorXd& x) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double scale = std::max(std::fabs(x(i)), std::numeric_limits<double>::min());
    worst = std::max(worst, std::fabs(step(i)) / scale);
  }
  return worst;
}

}  // namespace

LinearFit linear_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs,
                               const Eigen::VectorXd& weights) {
  const Eigen::Index m = design.rows();
  const Eigen::Index n = design.cols();
  if (rhs.size() != m) throw DomainError("design and rhs row counts differ");
  if (m < n) {
    throw FitError(FitError::Kind::kInsufficientData, "need at least as many rows as unknowns");
  }

  Eigen::MatrixXd a = design;
  Eigen::VectorXd b = rhs;
  if (weights.size() != 0) {
    if (weights.size() != m) throw DomainError("weights length differs from row count");
    a = weights.asDiagonal() * design;
    b = weights.asDiagonal() * rhs;
  }
  Eigen::VectorXd scale = a.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (scale(j) == 0.0) {
      throw FitError(FitError::Kind::kDegenerate, "design column " + std::to_string(j) + " is zero");
    }
  }
  const Eigen::MatrixXd scaled = a * scale.cwiseInverse().asDiagonal();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();

  LinearFit out;
  out.condition_number = sv(n - 1) > 0.0 ? sv(0) / sv(n - 1) : std::numeric_limits<double>::infinity();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  const Eigen::VectorXd y = qr.solve(b);
  out.coefficients = y.cwiseQuotient(scale);
  const Eigen::VectorXd wres = b - a * out.coefficients;
  out.residuals = rhs - design * out.coefficients;
  out.rss = wres.squaredNorm();
  out.dof = static_cast<int>(m - n);

  Eigen::VectorXd inv_s2(n);
  for (Eigen::Index i = 0; i < n; ++i) inv_s2(i) = sv(i) > 0.0 ? 1.0 / (sv(i) * sv(i)) : 0.0;
  const Eigen::MatrixXd scaled_inv = svd.matrixV() * inv_s2.asDiagonal() * svd.matrixV().transpose();
  const double sigma2 = out.dof > 0 ? out.rss / out.dof : 0.0;
  const Eigen::VectorXd inv_scale = scale.cwiseInverse();
  out.covariance = sigma2 * inv_scale.asDiagonal() * scaled_inv * inv_scale.asDiagonal();
  return out;
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int max_iterations) {
  const Eigen::Index n = a.cols();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.norm() * std::max<Eigen::Index>(a.rows(), n);

  auto solve_passive = [&](Eigen::VectorXd& z) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
    }
    z = Eigen::VectorXd::Zero(n);
    if (idx.empty()) return;
    Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
    const Eigen::VectorXd zs = sub.colPivHouseholderQr().solve(b);
    for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zs(static_cast<Eigen::Index>(k));
  };

  for (int outer = 0; outer < max_iterations; ++outer) {
    const Eigen::VectorXd w = a.transpose() * (b - a * x);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) return x;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner < max_iterations; ++inner) {
      Eigen::VectorXd z;
      solve_passive(z);
      bool feasible = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
      }
      if (feasible) {
        x = z;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) {
          alpha = std::min(alpha, x(j) / (x(j) - z(j)));
        }
      }
      x += alpha * (z - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && std::fabs(x(j)) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
  }
  throw FitError(FitError::Kind::kNonConvergence, "NNLS did not converge");
}

SolverResult gauss_newton(const Problem& problem, Eigen::VectorXd x, const SolverOptions& options) {
  SolverResult out;
  Eigen::VectorXd r = problem.residuals(x);
  double cost = 0.5 * r.squaredNorm();

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Eigen::MatrixXd jac = problem.jacobian(x);
    const Eigen::VectorXd full = jac.colPivHouseholderQr().solve(-r);
    const double slope = (jac.transpose() * r).dot(full);  // directional derivative of cost

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new, r_new;
    double cost_new = cost;
    for (int k = 0; k < 60; ++k) {
      x_new = x + t * full;
      r_new = problem.residuals(x_new);
      cost_new = 0.5 * r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new <= cost + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    const double step = relative_step(t * full, x);
    out.trace.push_back(trace_line(iter, cost, step, t, "t"));
    out.iterations = iter;

    if (!accepted) {
      // No descent left at working precision: the current point is the minimum.
      out.converged = relative_step(full, x) < 1e-8;
      break;
    }
    x = x_new;
    r = r_new;
    cost = cost_new;
    if (step < options.relative_step_tolerance || cost == 0.0) {
      out.converged = true;
      break;
    }
  }
  out.parameters = x;
  out.cost = cost;
  out.normal_inverse = normal_inverse(problem.jacobian(x));
  return out;
}

SolverResult levenberg_marquardt(const Problem& problem, Eigen::VectorXd x,
                                 const SolverOptions& options) {
  SolverResult out;
  Eigen::VectorXd r = problem.residuals(x);
  double cost = 0.5 * r.squaredNorm();
  Eigen::MatrixXd jac = problem.jacobian(x);
  double lambda = 1e-3;

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    Eigen::MatrixXd damped = jtj;
    for (Eigen::Index i = 0; i < damped.rows(); ++i) {
      damped(i, i) += lambda * std::max(jtj(i, i), 1e-300);
    }
    const Eigen::VectorXd delta = damped.ldlt().solve(-g);
    const Eigen::VectorXd x_new = x + delta;
    const Eigen::VectorXd r_new = problem.residuals(x_new);
    const double cost_new = 0.5 * r_new.squaredNorm();
    const double step = relative_step(delta, x);
    out.trace.push_back(trace_line(iter, cost, step, lambda, "lambda"));
    out.iterations = iter;

    if (std::isfinite(cost_new) && cost_new <= cost) {
      const double improvement = cost - cost_new;
      x = x_new;
      r = r_new;
      jac = problem.jacobian(x);
      lambda = std::max(lambda / 3.0, 1e-12);
      if (step < options.relative_step_tolerance || cost_new == 0.0 ||
          improvement <= 1e-15 * cost) {
        cost = cost_new;
        out.converged = true;
        break;
      }
      cost = cost_new;
    } else {
      lambda *= 4.0;
      if (lambda > 1e12) {
        out.converged = step < 1e-8;
        break;
      }
    }
  }
  out.parameters = x;
  out.cost = cost;
  out.normal_inverse = normal_inverse(jac);
  return out;
}

}  // namespace torsionlab::fit
