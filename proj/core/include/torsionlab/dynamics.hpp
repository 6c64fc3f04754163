#pragma once

// Time-domain model of the torsion pendulum, its actuators, and the
// optical-lever detector.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>

#include "torsionlab/physics.hpp"

namespace torsionlab {

/// Optical lever read out by a quadrant photodiode.
struct DetectorSpec {
  double sensitivity_mV_per_urad = 0.5;
  double quantization_mV = 0.1;  // 0 disables quantization

  double angular_resolution_urad_per_mV() const { return 1.0 / sensitivity_mV_per_urad; }
  /// Sensitivity in mV per radian.
  double mV_per_rad() const { return sensitivity_mV_per_urad * 1e6; }
  void validate() const;
};

struct ActuatorSpec {
  double pzt_accuracy = 0.2e-9;      // m rms, closed-loop PZT
  double pzt_range = 15e-6;          // m
  double stage_resolution = 8e-9;    // m, coarse stage
  double fb_plate_area = 1e-4;       // m^2
  double fb_gap = 1e-3;              // m
  double fb_bias = 10.0;             // V

  void validate() const;
};

struct InstrumentSpec {
  FiberSpec fiber;
  BalanceSpec balance;
  SphereSpec sphere;
  DetectorSpec detector;
  ActuatorSpec actuator;
  /// Replaces the fiber-derived torsion constant when set.
  std::optional<double> stiffness_override;

  double stiffness() const;
  void validate() const;
};

/// Seedable Gaussian source. Copying duplicates the stream position.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed = 0) : engine_(seed) {}

  double gaussian() { return normal_(engine_); }
  bool operator==(const NoiseSource& other) const {
    return engine_ == other.engine_ && normal_ == other.normal_;
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

struct SimState {
  double theta = 0.0;        // rad
  double omega = 0.0;        // rad/s
  double t = 0.0;            // s
  double pzt_command = 0.0;  // d_r commanded, m
  double pzt_actual = 0.0;   // d_r realised, m
  NoiseSource rng;
};

/// Linear plant I theta'' + gamma theta' + alpha theta = tau.
struct Plant {
  double inertia = 0.0;
  double stiffness = 0.0;
  double damping = 0.0;  // gamma = I omega0 / Q

  double natural_frequency() const;
  double period() const;
  double equilibrium_variance(double temperature) const;  // k_B T / alpha
  double energy(double theta, double omega) const;
  static Plant from(const InstrumentSpec& spec);
};

double natural_frequency(const BalanceSpec& balance, double stiffness);

/// One Langevin torque sample for a zero-order-hold step of length dt.
/// Variance 2 k_B T gamma / dt, which makes the discrete chain reproduce
/// <theta^2> = k_B T / alpha.
double thermal_torque_sample(const BalanceSpec& balance, double stiffness, double temperature,
                             double dt, NoiseSource& rng);

/// Exact discrete-time propagator of the damped oscillator with the torque
/// held constant over the step. Valid for any Q > 0 (under-, critically, or
/// over-damped); undamped motion conserves energy to rounding.
class Propagator {
 public:
  Propagator(const Plant& plant, double dt);

  /// Advances (theta, omega) by one step under constant torque.
  void advance(double& theta, double& omega, double torque) const;
  double dt() const { return dt_; }
  const Plant& plant() const { return plant_; }

 private:
  Plant plant_;
  double dt_;
  // theta_{n+1} - theta* = m00 (theta_n - theta*) + m01 omega_n, etc.
  double m00_, m01_, m10_, m11_;
};

struct StepOptions {
  double temperature = 300.0;
  bool thermal_noise = false;
};

/// Largest admissible integration step: one fiftieth of the natural period.
double max_time_step(const Plant& plant);

/// One integrator step of the pendulum. Rejects dt > period / 50.
SimState step(const SimState& state, const InstrumentSpec& spec, double external_torque, double dt,
              const StepOptions& options = {});

struct PztSample {
  double position = 0.0;
  bool saturated = false;
};

/// Realised PZT position: the command clamped to [0, range] plus Gaussian
/// jitter of rms `pzt_accuracy`.
PztSample pzt_actual_position(double command, const ActuatorSpec& spec, NoiseSource& rng);

/// Detector output in mV, quantized with round-half-away-from-zero.
double detector_read(double theta, const DetectorSpec& spec);

/// Row emitted by the time-series hook.
struct TraceRow {
  double t = 0.0;
  double theta = 0.0;
  double omega = 0.0;
  double pzt_actual = 0.0;
  double detector_mV = 0.0;
  ForceBreakdown forces;
};

using TraceSink = std::function<void(const TraceRow&)>;

}  // namespace torsionlab
