#include "torsionlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "torsionlab/errors.hpp"

namespace torsionlab {

using constants::kBoltzmann;
using constants::kPi;

void DetectorSpec::validate() const {
  if (!(sensitivity_mV_per_urad > 0.0)) throw DomainError("detector sensitivity must be positive");
  if (!(quantization_mV >= 0.0)) throw DomainError("detector quantization must be non-negative");
}

void ActuatorSpec::validate() const {
  if (!(pzt_accuracy >= 0.0)) throw DomainError("pzt_accuracy must be non-negative");
  if (!(pzt_range > 0.0)) throw DomainError("pzt_range must be positive");
  if (!(stage_resolution >= 0.0)) throw DomainError("stage_resolution must be non-negative");
  if (!(fb_plate_area > 0.0)) throw DomainError("fb_plate_area must be positive");
  if (!(fb_gap > 0.0)) throw DomainError("fb_gap must be positive");
  if (!std::isfinite(fb_bias)) throw DomainError("fb_bias must be finite");
}

double InstrumentSpec::stiffness() const {
  if (stiffness_override) {
    if (!(*stiffness_override > 0.0)) throw DomainError("stiffness override must be positive");
    return *stiffness_override;
  }
  return torsion_constant(fiber);
}

void InstrumentSpec::validate() const {
  fiber.validate();
  balance.validate();
  sphere.validate();
  detector.validate();
  actuator.validate();
  (void)stiffness();
}

double natural_frequency(const BalanceSpec& balance, double stiffness) {
  if (!(balance.moment_of_inertia > 0.0)) throw DomainError("moment of inertia must be positive");
  if (!(stiffness > 0.0)) throw DomainError("torsion stiffness must be positive");
  return std::sqrt(stiffness / balance.moment_of_inertia);
}

double Plant::natural_frequency() const {
  if (!(inertia > 0.0) || !(stiffness > 0.0)) throw DomainError("plant needs positive I and alpha");
  return std::sqrt(stiffness / inertia);
}

double Plant::period() const { return 2.0 * kPi / natural_frequency(); }

double Plant::equilibrium_variance(double temperature) const {
  return kBoltzmann * temperature / stiffness;
}

double Plant::energy(double theta, double omega) const {
  return 0.5 * inertia * omega * omega + 0.5 * stiffness * theta * theta;
}

Plant Plant::from(const InstrumentSpec& spec) {
  spec.validate();
  Plant p;
  p.inertia = spec.balance.moment_of_inertia;
  p.stiffness = spec.stiffness();
  p.damping = p.inertia * p.natural_frequency() / spec.balance.quality_factor;
  return p;
}

double thermal_torque_sample(const BalanceSpec& balance, double stiffness, double temperature,
                             double dt, NoiseSource& rng) {
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (!(temperature >= 0.0)) throw DomainError("temperature must be non-negative");
  if (!(balance.quality_factor > 0.0)) throw DomainError("quality factor must be positive");
  const double gamma =
      balance.moment_of_inertia * natural_frequency(balance, stiffness) / balance.quality_factor;
  const double sigma = std::sqrt(2.0 * kBoltzmann * temperature * gamma / dt);
  const double z = rng.gaussian();
  return sigma * z;
}

Propagator::Propagator(const Plant& plant, double dt) : plant_(plant), dt_(dt) {
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  const double w0 = plant.natural_frequency();
  if (!(plant.damping >= 0.0)) throw DomainError("damping must be non-negative");
  const double zeta = plant.damping / (2.0 * plant.inertia * w0);
  const double decay = std::exp(-zeta * w0 * dt);

  if (std::fabs(zeta - 1.0) < 1e-9) {
    m00_ = decay * (1.0 + w0 * dt);
    m01_ = decay * dt;
    m10_ = -decay * w0 * w0 * dt;
    m11_ = decay * (1.0 - w0 * dt);
  } else if (zeta < 1.0) {
    const double wd = w0 * std::sqrt(1.0 - zeta * zeta);
    const double c = std::cos(wd * dt);
    const double s = std::sin(wd * dt);
    m00_ = decay * (c + zeta * w0 / wd * s);
    m01_ = decay * s / wd;
    m10_ = -decay * w0 * w0 / wd * s;
    m11_ = decay * (c - zeta * w0 / wd * s);
  } else {
    const double wh = w0 * std::sqrt(zeta * zeta - 1.0);
    const double c = std::cosh(wh * dt);
    const double s = std::sinh(wh * dt);
    m00_ = decay * (c + zeta * w0 / wh * s);
    m01_ = decay * s / wh;
    m10_ = -decay * w0 * w0 / wh * s;
    m11_ = decay * (c - zeta * w0 / wh * s);
  }
}

void Propagator::advance(double& theta, double& omega, double torque) const {
  const double eq = torque / plant_.stiffness;
  const double x = theta - eq;
  const double v = omega;
  theta = eq + m00_ * x + m01_ * v;
  omega = m10_ * x + m11_ * v;
}

double max_time_step(const Plant& plant) { return plant.period() / 50.0; }

SimState step(const SimState& state, const InstrumentSpec& spec, double external_torque, double dt,
              const StepOptions& options) {
  const Plant plant = Plant::from(spec);
  const double limit = max_time_step(plant);
  if (!(dt > 0.0) || dt > limit) {
    throw DomainError("time step " + std::to_string(dt) + " s exceeds period/50 = " +
                      std::to_string(limit) + " s; reduce dt");
  }
  SimState next = state;
  double torque = external_torque;
  if (options.thermal_noise && options.temperature > 0.0) {
    torque += thermal_torque_sample(spec.balance, plant.stiffness, options.temperature, dt, next.rng);
  }
  Propagator(plant, dt).advance(next.theta, next.omega, torque);
  next.t = state.t + dt;
  if (!std::isfinite(next.theta) || !std::isfinite(next.omega)) {
    throw NumericalError("pendulum state became non-finite at t = " + std::to_string(next.t));
  }
  return next;
}

PztSample pzt_actual_position(double command, const ActuatorSpec& spec, NoiseSource& rng) {
  PztSample out;
  double target = command;
  if (command < 0.0 || command > spec.pzt_range) {
    target = std::clamp(command, 0.0, spec.pzt_range);
    out.saturated = true;
  }
  out.position = spec.pzt_accuracy > 0.0 ? target + spec.pzt_accuracy * rng.gaussian() : target;
  return out;
}

double detector_read(double theta, const DetectorSpec& spec) {
  const double raw = spec.mV_per_rad() * theta;
  const double q = spec.quantization_mV;
  if (q <= 0.0) return raw;
  // Half-way points within 1e-9 of a step round away from zero, so that
  // 0.1 urad at 0.5 mV/urad reads 0.1 mV despite binary rounding of 0.05.
  const double r = std::fabs(raw) / q;
  double n = std::floor(r);
  if (r - n >= 0.5 - 1e-9) n += 1.0;
  if (n == 0.0) return 0.0;
  return std::copysign(n * q, raw);
}

}  // namespace torsionlab
