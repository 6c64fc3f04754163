#include "torsionlab/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "torsionlab/errors.hpp"
#include "torsionlab/parallel.hpp"

namespace torsionlab {

using constants::kPi;
using constants::kVacuumPermittivity;

ParabolaFit parabola_fit(const VoltageSweep& sweep) {
  const auto& s = sweep.samples;
  std::set<double> distinct;
  for (const auto& p : s) distinct.insert(p.voltage);
  if (distinct.size() < 5) {
    throw FitError(FitError::Kind::kInsufficientData,
                   "voltage sweep needs at least 5 distinct voltages (got " +
                       std::to_string(distinct.size()) + ")");
  }
  const double v_lo = *distinct.begin();
  const double v_hi = *distinct.rbegin();
  const double center = 0.5 * (v_lo + v_hi);
  const double half_span = 0.5 * (v_hi - v_lo);

  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n);
  double peak = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = s[static_cast<std::size_t>(i)].voltage - center;
    design(i, 0) = x * x;
    design(i, 1) = x;
    design(i, 2) = 1.0;
    rhs(i) = s[static_cast<std::size_t>(i)].delta_v;
    peak = std::max(peak, std::fabs(rhs(i)));
  }
  const fit::LinearFit lin = fit::linear_least_squares(design, rhs);
  const double a = lin.coefficients(0);
  const double b = lin.coefficients(1);
  const double c = lin.coefficients(2);

  // The quadratic term must move the signal by more than rounding noise over the sweep.
  if (!(std::fabs(a) * half_span * half_span > 1e-10 * std::max(peak, 1e-300))) {
    throw FitError(FitError::Kind::kDegenerate,
                   "sweep at d_r = " + std::to_string(sweep.relative_position) +
                       " m has no resolvable curvature");
  }

  ParabolaFit out;
  out.curvature = a;
  out.v0 = center - b / (2.0 * a);
  out.offset = c - b * b / (4.0 * a);
  Eigen::Matrix3d jac;
  jac << b / (2.0 * a * a), -1.0 / (2.0 * a), 0.0,  //
      1.0, 0.0, 0.0,                                //
      b * b / (4.0 * a * a), -b / (2.0 * a), 1.0;
  out.covariance = jac * lin.covariance * jac.transpose();
  out.rms_residual = std::sqrt(lin.residuals.squaredNorm() / static_cast<double>(n));
  return out;
}

ContactFit contact_point_fit(std::span<const CurvaturePoint> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 4) {
    throw FitError(FitError::Kind::kInsufficientData,
                   "contact-point fit needs at least 4 positions spanning a factor 3 in gap (got " +
                       std::to_string(n) + ")");
  }
  const bool positive = points[0].curvature > 0.0;
  double max_dr = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    if (p.curvature == 0.0 || (p.curvature > 0.0) != positive) {
      throw FitError(FitError::Kind::kDegenerate, "curvature sign is inconsistent across positions");
    }
    max_dr = std::max(max_dr, p.relative_position);
  }

  // Seed: 1/k = d0/c - d_r/c is a straight line in d_r.
  Eigen::MatrixXd line(n, 2);
  Eigen::VectorXd inv_k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    line(i, 0) = 1.0;
    line(i, 1) = points[static_cast<std::size_t>(i)].relative_position;
    inv_k(i) = 1.0 / points[static_cast<std::size_t>(i)].curvature;
  }
  const auto seed = fit::linear_least_squares(line, inv_k);
  const double slope = seed.coefficients(1);
  if (slope == 0.0) throw FitError(FitError::Kind::kDegenerate, "curvature does not vary with d_r");
  Eigen::VectorXd x0(2);
  x0 << -seed.coefficients(0) / slope, -1.0 / slope;  // d0, c

  fit::Problem problem;
  problem.residuals = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = points[static_cast<std::size_t>(i)];
      r(i) = 1.0 - x(1) / ((x(0) - p.relative_position) * p.curvature);
    }
    return r;
  };
  problem.jacobian = [&](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = points[static_cast<std::size_t>(i)];
      const double gap = x(0) - p.relative_position;
      j(i, 0) = x(1) / (gap * gap * p.curvature);
      j(i, 1) = -1.0 / (gap * p.curvature);
    }
    return j;
  };
  const auto solved = fit::gauss_newton(problem, x0);
  if (!solved.converged) {
    throw FitError(FitError::Kind::kNonConvergence, "contact-point fit did not converge",
                   solved.trace);
  }

  ContactFit out;
  out.d0 = solved.parameters(0);
  out.prefactor = solved.parameters(1);
  out.iterations = solved.iterations;
  out.trace = solved.trace;
  if (!(out.d0 > max_dr)) {
    throw FitError(FitError::Kind::kInfeasible,
                   "fitted contact point d0 = " + std::to_string(out.d0) +
                       " m does not exceed the largest d_r = " + std::to_string(max_dr) + " m");
  }
  const double span = (out.d0 - [&] {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& p : points) lo = std::min(lo, p.relative_position);
    return lo;
  }()) / (out.d0 - max_dr);
  if (span < 3.0) {
    throw FitError(FitError::Kind::kInsufficientData,
                   "positions span only a factor " + std::to_string(span) +
                       " in gap; need at least 3");
  }
  const double rss = 2.0 * solved.cost;
  out.rms_relative_residual = std::sqrt(rss / static_cast<double>(n));
  const double sigma2 = n > 2 ? rss / static_cast<double>(n - 2) : 0.0;
  out.covariance = sigma2 * solved.normal_inverse;
  return out;
}

double beta_from_prefactor(double prefactor, double radius) {
  if (prefactor == 0.0) throw DomainError("hyperbola prefactor is zero");
  return kPi * kVacuumPermittivity * radius / prefactor;
}

std::function<double(double)> log_v0_profile(double offset, double slope_per_decade) {
  return [=](double d) { return offset + slope_per_decade * std::log10(d / 1e-6); };
}

CalibrationResult analyze_sweeps(std::span<const VoltageSweep> sweeps, double radius) {
  if (!(radius > 0.0)) throw DomainError("sphere radius must be positive");
  CalibrationResult out;
  std::vector<CurvaturePoint> curv;
  for (const auto& sweep : sweeps) {
    PositionFit pf;
    pf.relative_position = sweep.relative_position;
    try {
      pf.fit = parabola_fit(sweep);
      curv.push_back({sweep.relative_position, pf.fit->curvature});
    } catch (const std::exception& e) {
      pf.failure = e.what();
    }
    out.positions.push_back(std::move(pf));
  }

  try {
    out.contact = contact_point_fit(curv);
  } catch (const std::exception& e) {
    out.contact_failure = e.what();
    return out;
  }
  out.d0 = out.contact->d0;
  out.beta = beta_from_prefactor(out.contact->prefactor, radius);

  double max_force = 0.0, sum_sq = 0.0, beta_mean = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < sweeps.size(); ++i) {
    const auto& pf = out.positions[i];
    if (!pf.fit) continue;
    const double gap = out.d0 - pf.relative_position;
    out.v0_profile.push_back({gap, pf.fit->v0, pf.fit->v0_sigma()});
    const double b_i = kPi * kVacuumPermittivity * radius / (pf.fit->curvature * gap);
    out.beta_per_position.push_back(b_i);
    beta_mean += b_i;
    for (const auto& s : sweeps[i].samples) {
      const double model = electrostatic_force_pfa(radius, s.voltage, pf.fit->v0, gap);
      const double measured = out.beta * (s.delta_v - pf.fit->offset);
      max_force = std::max(max_force, model);
      sum_sq += (measured - model) * (measured - model);
      ++count;
    }
  }
  beta_mean /= static_cast<double>(out.beta_per_position.size());
  double spread = 0.0;
  for (double b : out.beta_per_position) spread += (b - beta_mean) * (b - beta_mean);
  out.beta_relative_spread =
      std::sqrt(spread / static_cast<double>(out.beta_per_position.size())) / beta_mean;
  out.force_mismatch = max_force > 0.0 ? std::sqrt(sum_sq / static_cast<double>(count)) / max_force : 0.0;

  if (out.v0_profile.size() >= 3) {
    const auto m = static_cast<Eigen::Index>(out.v0_profile.size());
    Eigen::MatrixXd log_design(m, 2), lin_design(m, 2);
    Eigen::VectorXd v0(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto& p = out.v0_profile[static_cast<std::size_t>(i)];
      log_design(i, 0) = lin_design(i, 0) = 1.0;
      log_design(i, 1) = std::log10(p.gap / 1e-6);
      lin_design(i, 1) = p.gap;
      v0(i) = p.v0;
    }
    try {
      out.v0_log_model = fit::linear_least_squares(log_design, v0);
      out.v0_linear_model = fit::linear_least_squares(lin_design, v0);
    } catch (const FitError&) {
      // All positions at one gap; the profile table stands on its own.
    }
  }
  return out;
}

CalibrationResult run_electrostatic_calibration(const CalibrationScenario& sc,
                                                std::span<const double> positions,
                                                std::span<const double> voltages,
                                                std::vector<VoltageSweep>* sweeps_out) {
  if (positions.empty() || voltages.empty()) throw DomainError("positions and voltages must be non-empty");
  for (std::size_t i = 1; i < positions.size(); ++i) {
    if (!(positions[i] > positions[i - 1])) {
      throw DomainError("calibration positions must increase strictly toward contact");
    }
  }
  if (!(positions.back() < sc.contact_offset)) {
    throw DomainError("every calibration position must leave a positive gap (d_r < d0)");
  }
  sc.forces.validate();
  const NullScenario& base = sc.loop;
  if (base.check_stability) verify_loop_stability(base.instrument, base.pid, base.mode, base.dt);

  const std::size_t nv = voltages.size();
  const std::size_t jobs = positions.size() * nv;
  auto runs = parallel_try_map(jobs, sc.workers, [&](std::size_t k) {
    const std::size_t i = k / nv;
    const std::size_t j = k % nv;
    NullScenario run = base;
    run.check_stability = false;
    run.applied_force = 0.0;
    run.pzt_command = positions[i];
    run.contact_offset = sc.contact_offset;
    run.seed = derive_seed(base.seed, k);
    ForceModelParams f = sc.forces;
    f.voltages.applied = voltages[j];
    f.voltages.minimizing = sc.v0_profile(sc.contact_offset - positions[i]);
    run.force_model = f;
    return run_null_measurement(run).steady_delta_v;
  });

  std::vector<VoltageSweep> sweeps(positions.size());
  std::vector<std::string> failures(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    sweeps[i].relative_position = positions[i];
    for (std::size_t j = 0; j < nv; ++j) {
      auto& slot = runs[i * nv + j];
      if (slot.value) {
        sweeps[i].samples.push_back({voltages[j], *slot.value});
      } else if (failures[i].empty()) {
        try {
          std::rethrow_exception(slot.error);
        } catch (const std::exception& e) {
          failures[i] = std::string("null measurement failed: ") + e.what();
        }
      }
    }
  }

  CalibrationResult result = analyze_sweeps(sweeps, sc.forces.sphere.radius);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!failures[i].empty() && result.positions[i].failure.empty()) {
      result.positions[i].failure = failures[i];
    }
  }
  if (sweeps_out) *sweeps_out = std::move(sweeps);
  return result;
}

ResidualDecomposition decompose_residual(std::span<const ResidualPoint> points,
                                         const DecompositionOptions& options) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 6) {
    throw FitError(FitError::Kind::kInsufficientData,
                   "residual decomposition needs at least 6 points (got " + std::to_string(n) + ")");
  }
  double d_lo = std::numeric_limits<double>::infinity(), d_hi = 0.0;
  for (const auto& p : points) {
    if (!(p.gap > 0.0)) throw DomainError("residual points need positive gaps");
    d_lo = std::min(d_lo, p.gap);
    d_hi = std::max(d_hi, p.gap);
  }
  if (d_hi / d_lo < 5.0) {
    throw FitError(FitError::Kind::kInsufficientData,
                   "gaps span only a factor " + std::to_string(d_hi / d_lo) + "; need at least 5");
  }

  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n), weights(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    design(i, 0) = 1.0 / p.gap;
    design(i, 1) = design(i, 0) / p.gap;
    design(i, 2) = design(i, 1) / p.gap;
    rhs(i) = p.force;
    if (options.weighting == ResidualWeighting::kRelative) {
      if (p.force == 0.0) throw DomainError("relative weighting needs non-zero forces");
      weights(i) = 1.0 / std::fabs(p.force);
    } else {
      weights(i) = 1.0;
    }
  }

  const fit::LinearFit full = fit::linear_least_squares(design, rhs, weights);
  if (full.condition_number > 1e12) {
    throw FitError(FitError::Kind::kIllConditioned,
                   "basis {1/d, 1/d^2, 1/d^3} is ill-conditioned (cond = " +
                       std::to_string(full.condition_number) + "); widen the gap span");
  }

  ResidualDecomposition out;
  out.condition_number = full.condition_number;
  Eigen::VectorXd coef = full.coefficients;
  Eigen::Matrix3d cov = full.covariance;

  if (options.non_negative) {
    const Eigen::MatrixXd wa = weights.asDiagonal() * design;
    const Eigen::VectorXd wb = weights.asDiagonal() * rhs;
    const Eigen::VectorXd scale = wa.colwise().norm().transpose();
    const Eigen::VectorXd y = fit::nnls(wa * scale.cwiseInverse().asDiagonal(), wb);
    coef = y.cwiseQuotient(scale);
    // Uncertainties from the unconstrained refit on the active columns.
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < 3; ++j) {
      if (coef(j) > 0.0) active.push_back(j);
    }
    cov.setZero();
    if (!active.empty() && n > static_cast<Eigen::Index>(active.size())) {
      Eigen::MatrixXd sub(n, static_cast<Eigen::Index>(active.size()));
      for (std::size_t k = 0; k < active.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = design.col(active[k]);
      const auto refit = fit::linear_least_squares(sub, rhs, weights);
      for (std::size_t a = 0; a < active.size(); ++a) {
        for (std::size_t b = 0; b < active.size(); ++b) {
          cov(active[a], active[b]) =
              refit.covariance(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
      }
    }
    out.rss = (weights.asDiagonal() * (rhs - design * coef)).squaredNorm();
  } else {
    out.rss = full.rss;
  }

  for (int j = 0; j < 3; ++j) {
    out.coefficients[static_cast<std::size_t>(j)] = coef(j);
    out.uncertainties[static_cast<std::size_t>(j)] = std::sqrt(std::max(cov(j, j), 0.0));
  }
  out.covariance = cov;

  const double nd = static_cast<double>(n);
  auto aic = [&](double rss, int k) {
    return nd * std::log(std::max(rss, std::numeric_limits<double>::min()) / nd) + 2.0 * k;
  };
  out.full_aic = aic(out.rss, 3);
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < 3; ++j) {
    const auto single = fit::linear_least_squares(design.col(j), rhs, weights);
    out.single_term_rss[static_cast<std::size_t>(j)] = single.rss;
    out.single_term_aic[static_cast<std::size_t>(j)] = aic(single.rss, 1);
    if (single.rss < best) {
      best = single.rss;
      out.best_single_term = j;
    }
  }
  return out;
}

}  // namespace torsionlab
