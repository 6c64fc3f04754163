#pragma once

// Analytic sensitivity budget of the torsion balance: thermal angle noise,
// swing-mode noise, detector-limited force resolution, actuator-jitter force
// floors, and the largest gap at which the thermal Casimir force stays
// resolvable.

#include <optional>
#include <string>
#include <vector>

#include "torsionlab/dynamics.hpp"
#include "torsionlab/physics.hpp"

namespace torsionlab {

/// sqrt(k_B T / alpha), torsional mode.
double thermal_angle_noise(double stiffness, double temperature);

/// sqrt(k_B T / (m g l)), gravitational swing mode.
double swing_angle_noise(double mass, double length, double temperature);

/// alpha * delta_theta_min / r_arm.
double force_resolution_from_angle(double stiffness, double min_angle, double arm);

struct JitterParams {
  double voltage = 5e-3;       // V - V0 for electrostatic, V_patch for patch
  double temperature = 300.0;  // K, thermal Casimir
  double patch_exponent = 1.0;
};

/// |dF/dd| * delta_d, evaluated analytically: n F / d for an F ~ d^-n law.
double jitter_force_floor(ForceComponent model, double radius, double gap, double jitter,
                          const JitterParams& params = {});

/// Gap at which the high-temperature Casimir force equals `min_force`:
/// sqrt(zeta(3) k_B T R / (8 F_min)).
double max_thermal_casimir_distance(double radius, double temperature, double min_force);

/// Every field is required; `from_instrument` fills them from a configuration.
struct SensitivityInputs {
  std::optional<double> stiffness;        // N m / rad
  std::optional<double> temperature;      // K
  std::optional<double> mass;             // kg
  std::optional<double> pendulum_length;  // m
  std::optional<double> casimir_arm;      // m
  std::optional<double> min_angle;        // rad, detector-limited deflection
  std::optional<double> radius;           // m
  std::optional<double> voltage;          // V, patch / residual electrostatic
  std::optional<double> jitter;           // m, actuator position accuracy
  std::optional<double> gap;              // m, evaluation gap for jitter floors
  bool thermal_model = true;

  /// Uses 0.1 urad for the minimum angle, 1 um as the evaluation gap, and
  /// the instrument's PZT accuracy as the jitter.
  static SensitivityInputs from_instrument(const InstrumentSpec& spec, double temperature,
                                           double patch_voltage);
};

struct JitterFloor {
  ForceComponent model;
  double force = 0.0;            // at the configured jitter
  double force_worst_case = 0.0; // jitter x 10
};

struct SensitivityReport {
  double delta_theta_min = 0.0;
  double delta_theta_thermal = 0.0;
  double delta_theta_swing = 0.0;
  double force_resolution = 0.0;
  std::vector<JitterFloor> jitter_floors;
  std::optional<double> d_max_thermal;

  /// Resolution ratio delta_theta_min / delta_theta_thermal (> 1: detector-limited).
  double thermal_margin = 0.0;
  bool thermal_below_resolution = false;
  /// Swing noise is below 1% of the detector-limited angle.
  bool swing_negligible = false;
  /// Jitter floors for electrostatic, patch, and thermal Casimir stay below
  /// 1 pN even with ten times the jitter.
  bool worst_case_jitter_below_1pN = false;

  SensitivityInputs inputs;
};

/// Throws ConfigError listing every absent field.
SensitivityReport build_report(const SensitivityInputs& inputs);

}  // namespace torsionlab
