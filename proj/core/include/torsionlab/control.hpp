#pragma once

// Null-measurement feedback loop: detector -> PID -> feedback plates.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "torsionlab/dynamics.hpp"
#include "torsionlab/physics.hpp"

namespace torsionlab {

/// Gains act on the detector error in mV and produce feedback volts.
struct PidConfig {
  double kp = 0.0813;             // V / mV
  double ki = 0.00586;            // V / (mV s)
  double kd = 0.439;              // V s / mV
  double derivative_filter = 0.5;  // s, first-order filter on the derivative term
  double output_min = -10.0;      // V
  double output_max = 10.0;       // V
  double integral_min = -10.0;    // V, anti-windup clamp
  double integral_max = 10.0;     // V
  double sample_interval = 0.05;  // s

  void validate() const;
  std::string describe() const;
};

struct PidState {
  double integral = 0.0;
  double last_measurement = 0.0;
  double derivative = 0.0;

  bool operator==(const PidState&) const = default;
};

struct PidStep {
  double output = 0.0;
  bool saturated = false;
  PidState state;
};

/// Discrete PID with derivative on measurement and a clamped integrator.
/// The setpoint is zero, so `error` is the detector reading itself.
PidStep pid_step(const PidConfig& cfg, const PidState& state, double error, double dt);

/// Gains placing all three closed-loop poles at s = -pole for the given
/// plant, linear actuator, and detector.
PidConfig pole_placement_gains(const InstrumentSpec& spec, double pole);

enum class ActuatorMode { kLinear, kQuadratic };

/// Restoring torque produced by the feedback plates for correction voltage
/// `delta_v`, referenced to the bias-only torque so that zero correction
/// gives zero torque.
double feedback_torque(double delta_v, const ActuatorSpec& actuator, const BalanceSpec& balance,
                       ActuatorMode mode);

/// Small-signal torque per feedback volt (linear mode).
double feedback_gain(const ActuatorSpec& actuator, const BalanceSpec& balance);

/// Force per feedback volt at the Casimir arm in linear mode: the true
/// calibration factor of a simulated instrument.
double true_calibration_factor(const ActuatorSpec& actuator, const BalanceSpec& balance);

struct LoopRecord {
  double t = 0.0;            // s
  double error_mV = 0.0;
  double delta_v = 0.0;      // V
  double theta = 0.0;        // rad
  double applied_force = 0.0;  // N
};

struct NullScenario {
  InstrumentSpec instrument;
  PidConfig pid;
  ActuatorMode mode = ActuatorMode::kLinear;

  /// Constant force on the Casimir plate, added to the force model if any.
  double applied_force = 0.0;
  /// When set, sphere-plane forces are evaluated every step at the realised gap.
  std::optional<ForceModelParams> force_model;
  double pzt_command = 0.0;       // d_r, m
  double contact_offset = 10e-6;  // d0, m

  double temperature = 300.0;
  bool thermal_noise = false;
  bool pzt_jitter = false;

  double duration = 300.0;  // s
  double dt = 0.05;         // s
  std::uint64_t seed = 1;
  bool check_stability = true;
};

struct NullResult {
  std::vector<LoopRecord> records;
  double steady_delta_v = 0.0;  // mean over the final third
  double steady_theta = 0.0;    // mean over the final third
  double settled_theta_rms = 0.0;
  double settled_delta_v_rms = 0.0;  // fluctuation about the mean
  bool output_saturated = false;
  bool pzt_saturated = false;
};

/// Simulated step response of the closed loop (noiseless, unquantized) over
/// ten natural periods. Throws InstabilityError naming the gains when the
/// response fails to decay.
void verify_loop_stability(const InstrumentSpec& spec, const PidConfig& pid, ActuatorMode mode,
                           double dt);

NullResult run_null_measurement(const NullScenario& scenario, const TraceSink& trace = {});

}  // namespace torsionlab
