#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "torsionlab/calibration.hpp"
#include "torsionlab/dynamics.hpp"
#include "torsionlab/errors.hpp"

namespace torsionlab {

using constants::kPi;

double gain_from_fringe_period(double period_volts, double wavelength) {
  if (!(period_volts > 0.0) || !(wavelength > 0.0)) {
    throw DomainError("fringe period and wavelength must be positive");
  }
  return fringe_displacement(wavelength) / period_volts;
}

namespace {

// |sum (I - mean) exp(-2 pi i f V)|^2
double periodogram(const std::vector<double>& v, const std::vector<double>& y, double f) {
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = 0; i < v.size(); ++i) acc += y[i] * std::polar(1.0, -2.0 * kPi * f * v[i]);
  return std::norm(acc);
}

}  // namespace

MichelsonFit michelson_calibrate(const MichelsonTrace& trace) {
  const auto& v = trace.voltage;
  const std::size_t n = v.size();
  if (n != trace.intensity.size()) throw DomainError("voltage and intensity lengths differ");
  if (!(trace.wavelength > 0.0)) throw DomainError("wavelength must be positive");
  if (n < 8) throw FitError(FitError::Kind::kInsufficientData, "Michelson trace needs at least 8 samples");

  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double span = *hi_it - *lo_it;
  const double mean = std::accumulate(trace.intensity.begin(), trace.intensity.end(), 0.0) / n;
  std::vector<double> centered(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    centered[i] = trace.intensity[i] - mean;
    var += centered[i] * centered[i];
  }
  if (!(span > 0.0) || var <= 1e-24 * mean * mean * static_cast<double>(n)) {
    throw FitError(FitError::Kind::kInsufficientData,
                   "Michelson trace shows no intensity modulation; need at least 2 fringes");
  }

  // Coarse periodogram scan up to the mean-spacing Nyquist frequency, then golden-section refinement.
  const double f_max = 0.5 * static_cast<double>(n - 1) / span;
  const double df = 0.125 / span;
  double best_f = df, best_p = -1.0;
  for (double f = df; f <= f_max; f += df) {
    const double p = periodogram(v, centered, f);
    if (p > best_p) {
      best_p = p;
      best_f = f;
    }
  }
  double a = std::max(best_f - df, 0.5 * df), b = best_f + df;
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 80; ++it) {
    const double c = b - golden * (b - a);
    const double d = a + golden * (b - a);
    if (periodogram(v, centered, c) > periodogram(v, centered, d)) {
      b = d;
    } else {
      a = c;
    }
  }
  const double f0 = 0.5 * (a + b);
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) acc += centered[i] * std::polar(1.0, -2.0 * kPi * f0 * v[i]);
  const double amp = 2.0 * std::abs(acc) / static_cast<double>(n);

  Eigen::VectorXd x0(4);
  x0 << mean, amp / mean, f0, std::arg(acc);

  const auto ni = static_cast<Eigen::Index>(n);
  fit::Problem problem;
  problem.residuals = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(ni);
    for (Eigen::Index i = 0; i < ni; ++i) {
      const double vi = v[static_cast<std::size_t>(i)];
      r(i) = x(0) * (1.0 + x(1) * std::cos(2.0 * kPi * x(2) * vi + x(3))) -
             trace.intensity[static_cast<std::size_t>(i)];
    }
    return r;
  };
  problem.jacobian = [&](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(ni, 4);
    for (Eigen::Index i = 0; i < ni; ++i) {
      const double vi = v[static_cast<std::size_t>(i)];
      const double arg = 2.0 * kPi * x(2) * vi + x(3);
      const double c = std::cos(arg), s = std::sin(arg);
      j(i, 0) = 1.0 + x(1) * c;
      j(i, 1) = x(0) * c;
      j(i, 2) = -x(0) * x(1) * s * 2.0 * kPi * vi;
      j(i, 3) = -x(0) * x(1) * s;
    }
    return j;
  };
  fit::SolverOptions opts;
  opts.max_iterations = 200;
  opts.relative_step_tolerance = 1e-14;
  const auto solved = fit::levenberg_marquardt(problem, x0, opts);
  if (!solved.converged) {
    throw FitError(FitError::Kind::kNonConvergence, "fringe fit did not converge", solved.trace);
  }

  double i0 = solved.parameters(0), vis = solved.parameters(1), f = solved.parameters(2),
         phase = solved.parameters(3);
  if (vis < 0.0) {
    vis = -vis;
    phase += kPi;
  }
  if (f < 0.0) {  // cos is even: (f, phase) and (-f, -phase) describe the same trace.
    f = -f;
    phase = -phase;
  }
  phase = std::remainder(phase, 2.0 * kPi);

  MichelsonFit out;
  out.mean_intensity = i0;
  out.visibility = vis;
  out.phase = phase;
  out.fringe_period = 1.0 / f;
  out.fringes = f * span;
  out.gain = gain_from_fringe_period(out.fringe_period, trace.wavelength);
  out.rms_residual = std::sqrt(2.0 * solved.cost / static_cast<double>(n));
  out.low_contrast = vis < 0.1;
  if (out.fringes < 2.0) {
    throw FitError(FitError::Kind::kInsufficientData,
                   "trace covers only " + std::to_string(out.fringes) + " fringes; need at least 2");
  }
  return out;
}

MichelsonTrace synthesize_michelson_trace(const MichelsonSynthesis& p) {
  if (!(p.gain > 0.0) || !(p.fringes > 0.0) || p.samples < 2) {
    throw DomainError("synthetic trace needs positive gain, fringes, and >= 2 samples");
  }
  MichelsonTrace trace;
  trace.wavelength = p.wavelength;
  const double period = fringe_displacement(p.wavelength) / p.gain;
  const double span = p.fringes * period;
  NoiseSource rng(p.seed);
  for (int i = 0; i < p.samples; ++i) {
    const double volt = span * i / (p.samples - 1);
    double y = p.mean_intensity *
               (1.0 + p.visibility * std::cos(4.0 * kPi * p.gain * volt / p.wavelength + p.phase));
    if (p.noise > 0.0) y += p.noise * p.mean_intensity * rng.gaussian();
    trace.voltage.push_back(volt);
    trace.intensity.push_back(y);
  }
  return trace;
}

}  // namespace torsionlab
