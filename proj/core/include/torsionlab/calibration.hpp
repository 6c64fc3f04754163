#pragma once

// Electrostatic calibration pipeline: parabola fits of the feedback signal
// against bias voltage, contact-point and calibration-factor recovery,
// distance-resolved minimizing potential, and decomposition of the residual
// force at V = V0.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "torsionlab/control.hpp"
#include "torsionlab/fitting.hpp"

namespace torsionlab {

struct SweepSample {
  double voltage = 0.0;  // applied V
  double delta_v = 0.0;  // steady feedback signal, V
};

struct VoltageSweep {
  double relative_position = 0.0;  // d_r, m
  std::vector<SweepSample> samples;
};

/// delta_v = k (V - V0)^2 + offset.
struct ParabolaFit {
  double v0 = 0.0;         // V
  double curvature = 0.0;  // V / V^2
  double offset = 0.0;     // V
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // of (v0, curvature, offset)
  double rms_residual = 0.0;

  double v0_sigma() const { return std::sqrt(covariance(0, 0)); }
  double curvature_sigma() const { return std::sqrt(covariance(1, 1)); }
};

ParabolaFit parabola_fit(const VoltageSweep& sweep);

struct CurvaturePoint {
  double relative_position = 0.0;  // d_r, m
  double curvature = 0.0;          // V / V^2
};

/// k = c / (d0 - d_r).
struct ContactFit {
  double d0 = 0.0;         // m
  double prefactor = 0.0;  // c, V m / V^2
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double rms_relative_residual = 0.0;
  int iterations = 0;
  std::vector<std::string> trace;
};

/// Gauss-Newton fit of the curvature hyperbola on relative residuals
/// 1 - c / ((d0 - d_r) k), seeded from the straight line 1/k vs d_r.
/// Requires >= 4 points spanning a factor 3 in the recovered gap.
ContactFit contact_point_fit(std::span<const CurvaturePoint> points);

/// Calibration factor (N per feedback volt) implied by the hyperbola
/// prefactor for a sphere of radius R: beta = pi eps0 R / c.
double beta_from_prefactor(double prefactor, double radius);

struct PositionFit {
  double relative_position = 0.0;
  std::optional<ParabolaFit> fit;
  std::string failure;  // empty on success
};

struct V0Point {
  double gap = 0.0;  // d = d0 - d_r, m
  double v0 = 0.0;   // V
  double sigma = 0.0;
};

struct CalibrationResult {
  std::vector<PositionFit> positions;
  std::optional<ContactFit> contact;
  std::string contact_failure;

  double d0 = 0.0;    // m, valid when ok()
  double beta = 0.0;  // N / V, valid when ok()
  std::vector<V0Point> v0_profile;

  /// pi eps0 R / (k_i d_i) per position; a flat profile means beta is gap independent.
  std::vector<double> beta_per_position;
  double beta_relative_spread = 0.0;
  /// rms of beta (dV - offset) - pi R eps0 (V - V0)^2 / d over all samples,
  /// relative to the largest electrostatic force in the set.
  double force_mismatch = 0.0;

  /// V0 = a + b log10(d / 1 um) and V0 = a + b d, when >= 3 positions fitted.
  std::optional<fit::LinearFit> v0_log_model;
  std::optional<fit::LinearFit> v0_linear_model;

  bool ok() const { return contact.has_value(); }
};

/// Analysis half of the pipeline, usable on measured sweeps.
CalibrationResult analyze_sweeps(std::span<const VoltageSweep> sweeps, double sphere_radius);

struct CalibrationScenario {
  /// Loop, instrument, noise, timing, and seed. `applied_force`,
  /// `force_model`, `pzt_command`, and `contact_offset` are overwritten per run.
  NullScenario loop;
  ForceModelParams forces;
  double contact_offset = 10e-6;  // injected d0
  /// Injected minimizing potential as a function of the absolute gap.
  std::function<double(double)> v0_profile = [](double) { return 0.0; };
  unsigned workers = 0;  // 0 = hardware concurrency
};

/// Distance-dependent CPD model 20 mV + 5 mV log10(d / 1 um) with adjustable terms.
std::function<double(double)> log_v0_profile(double offset, double slope_per_decade);

/// Simulates a null measurement for every (position, voltage) pair and
/// analyzes the resulting sweeps. Positions must increase strictly (toward contact).
CalibrationResult run_electrostatic_calibration(const CalibrationScenario& scenario,
                                                std::span<const double> positions,
                                                std::span<const double> voltages,
                                                std::vector<VoltageSweep>* sweeps_out = nullptr);

struct ResidualPoint {
  double gap = 0.0;    // m
  double force = 0.0;  // N
};

enum class ResidualWeighting { kUniform, kRelative };

struct DecompositionOptions {
  bool non_negative = false;
  ResidualWeighting weighting = ResidualWeighting::kRelative;
};

/// F(d) = C1/d + C2/d^2 + C3/d^3.
struct ResidualDecomposition {
  std::array<double, 3> coefficients{};   // C1 (N m), C2 (N m^2), C3 (N m^3)
  std::array<double, 3> uncertainties{};
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  double condition_number = 0.0;
  double rss = 0.0;                        // weighted, full model
  std::array<double, 3> single_term_rss{}; // each basis function alone
  std::array<double, 3> single_term_aic{};
  double full_aic = 0.0;
  int best_single_term = 0;                // 0 -> 1/d, 1 -> 1/d^2, 2 -> 1/d^3
};

/// Requires >= 6 points spanning a factor 5 in d.
ResidualDecomposition decompose_residual(std::span<const ResidualPoint> points,
                                         const DecompositionOptions& options = {});

// --- interferometric PZT calibration -------------------------------------

inline constexpr double kHeNeWavelength = 632.8e-9;

struct MichelsonTrace {
  std::vector<double> voltage;    // V applied to the PZT
  std::vector<double> intensity;  // arbitrary units
  double wavelength = kHeNeWavelength;
};

struct MichelsonFit {
  double gain = 0.0;  // m / V, positive by convention
  double visibility = 0.0;
  double mean_intensity = 0.0;
  double phase = 0.0;
  double fringe_period = 0.0;  // V per fringe
  double fringes = 0.0;        // fringes covered by the trace
  double rms_residual = 0.0;
  bool low_contrast = false;   // visibility < 0.1
};

/// Displacement per fringe: lambda / 2.
constexpr double fringe_displacement(double wavelength) { return 0.5 * wavelength; }

/// Gain from an observed fringe period in volts.
double gain_from_fringe_period(double period_volts, double wavelength = kHeNeWavelength);

/// Fits I0 (1 + v cos(4 pi g V / lambda + phi)): periodogram peak for the
/// initial frequency, then Levenberg-Marquardt on all four parameters.
MichelsonFit michelson_calibrate(const MichelsonTrace& trace);

struct MichelsonSynthesis {
  double gain = 100e-9;  // m / V
  double visibility = 0.95;
  double fringes = 6.0;
  int samples = 600;
  double mean_intensity = 1.0;
  double phase = 0.3;
  double noise = 0.0;  // rms, relative to mean intensity
  double wavelength = kHeNeWavelength;
  std::uint64_t seed = 1;
};

MichelsonTrace synthesize_michelson_trace(const MichelsonSynthesis& params);

}  // namespace torsionlab
