#include "torsionlab/control.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>

#include "torsionlab/errors.hpp"

namespace torsionlab {

using constants::kVacuumPermittivity;

void PidConfig::validate() const {
  if (!(sample_interval > 0.0)) throw DomainError("PID sample interval must be positive");
  for (double v : {kp, ki, kd, derivative_filter, output_min, output_max, integral_min, integral_max}) {
    if (!std::isfinite(v)) throw DomainError("PID parameters must be finite");
  }
  if (derivative_filter < 0.0) throw DomainError("derivative filter time must be non-negative");
  if (output_min > output_max || integral_min > integral_max) {
    throw DomainError("PID limits are inverted");
  }
}

std::string PidConfig::describe() const {
  std::ostringstream os;
  os << "kp=" << kp << " V/mV, ki=" << ki << " V/(mV s), kd=" << kd << " V s/mV";
  return os.str();
}

PidStep pid_step(const PidConfig& cfg, const PidState& state, double error, double dt) {
  if (!(dt > 0.0)) throw DomainError("PID dt must be positive");
  PidStep out;
  out.state = state;
  PidState& s = out.state;

  s.integral = std::clamp(s.integral + cfg.ki * error * dt, cfg.integral_min, cfg.integral_max);

  const double raw_rate = (error - s.last_measurement) / dt;
  if (cfg.derivative_filter > 0.0) {
    s.derivative += dt / (cfg.derivative_filter + dt) * (raw_rate - s.derivative);
  } else {
    s.derivative = raw_rate;
  }
  s.last_measurement = error;

  const double u = cfg.kp * error + s.integral + cfg.kd * s.derivative;
  out.output = std::clamp(u, cfg.output_min, cfg.output_max);
  out.saturated = out.output != u;
  return out;
}

double feedback_gain(const ActuatorSpec& actuator, const BalanceSpec& balance) {
  return kVacuumPermittivity * actuator.fb_plate_area * actuator.fb_bias /
         (actuator.fb_gap * actuator.fb_gap) * balance.feedback_arm;
}

double true_calibration_factor(const ActuatorSpec& actuator, const BalanceSpec& balance) {
  return feedback_gain(actuator, balance) / balance.casimir_arm;
}

double feedback_torque(double delta_v, const ActuatorSpec& actuator, const BalanceSpec& balance,
                       ActuatorMode mode) {
  if (!(actuator.fb_gap > 0.0)) throw DomainError("feedback gap must be positive");
  if (mode == ActuatorMode::kLinear) return feedback_gain(actuator, balance) * delta_v;
  const double b = actuator.fb_bias;
  const double g2 = actuator.fb_gap * actuator.fb_gap;
  // (b + dV)^2 - b^2 written as dV (2b + dV) to avoid cancellation.
  return kVacuumPermittivity * actuator.fb_plate_area * delta_v * (2.0 * b + delta_v) /
         (2.0 * g2) * balance.feedback_arm;
}

PidConfig pole_placement_gains(const InstrumentSpec& spec, double pole) {
  if (!(pole > 0.0)) throw DomainError("pole must be positive");
  const Plant plant = Plant::from(spec);
  // Closed loop: I s^3 + (gamma + G S kd) s^2 + (alpha + G S kp) s + G S ki = I (s + p)^3
  const double gs = feedback_gain(spec.actuator, spec.balance) * spec.detector.mV_per_rad();
  if (!(gs > 0.0)) throw DomainError("feedback gain is zero; set a nonzero fb_bias");
  PidConfig cfg;
  cfg.kd = (3.0 * pole * plant.inertia - plant.damping) / gs;
  cfg.kp = (3.0 * pole * pole * plant.inertia - plant.stiffness) / gs;
  cfg.ki = pole * pole * pole * plant.inertia / gs;
  return cfg;
}

namespace {

struct LoopParts {
  Plant plant;
  Propagator propagator;
  int controller_every;
  double pid_dt;
};

LoopParts prepare(const InstrumentSpec& spec, const PidConfig& pid, double dt) {
  pid.validate();
  const Plant plant = Plant::from(spec);
  const double limit = max_time_step(plant);
  if (!(dt > 0.0) || dt > limit) {
    throw DomainError("time step " + std::to_string(dt) + " s exceeds period/50 = " +
                      std::to_string(limit) + " s; reduce dt");
  }
  const int every = std::max(1, static_cast<int>(std::lround(pid.sample_interval / dt)));
  return {plant, Propagator(plant, dt), every, every * dt};
}

}  // namespace

void verify_loop_stability(const InstrumentSpec& spec, const PidConfig& pid, ActuatorMode mode,
                           double dt) {
  const LoopParts parts = prepare(spec, pid, dt);
  const double probe_torque = 1e-9 * spec.balance.casimir_arm;
  const double horizon = 10.0 * parts.plant.period();
  const auto steps = static_cast<long>(std::ceil(horizon / dt));

  DetectorSpec clean = spec.detector;
  clean.quantization_mV = 0.0;

  double theta = 0.0, omega = 0.0, delta_v = 0.0, peak = 0.0;
  PidState state;
  for (long i = 0; i < steps; ++i) {
    if (i % parts.controller_every == 0) {
      const auto r = pid_step(pid, state, detector_read(theta, clean), parts.pid_dt);
      state = r.state;
      delta_v = r.output;
    }
    const double torque = probe_torque - feedback_torque(delta_v, spec.actuator, spec.balance, mode);
    parts.propagator.advance(theta, omega, torque);
    if (!std::isfinite(theta)) break;
    peak = std::max(peak, std::fabs(theta));
  }
  if (!std::isfinite(theta) || peak == 0.0 || std::fabs(theta) > 1e-3 * peak) {
    throw InstabilityError("feedback loop failed the step-response check (" + pid.describe() +
                           "): residual angle did not decay within ten natural periods");
  }
}

NullResult run_null_measurement(const NullScenario& sc, const TraceSink& trace) {
  const InstrumentSpec& spec = sc.instrument;
  if (!(sc.duration > 0.0)) throw DomainError("duration must be positive");
  const LoopParts parts = prepare(spec, sc.pid, sc.dt);
  if (sc.force_model) sc.force_model->validate();
  if (sc.check_stability) verify_loop_stability(spec, sc.pid, sc.mode, sc.dt);

  const auto steps = static_cast<long>(std::llround(sc.duration / sc.dt));
  if (steps < 3) throw DomainError("duration must cover at least three time steps");
  const double arm = spec.balance.casimir_arm;
  const double q_angle = spec.detector.quantization_mV > 0.0
                             ? spec.detector.quantization_mV / spec.detector.mV_per_rad()
                             : 0.1e-6;
  const double divergence_limit = 100.0 * q_angle;
  const long settle = steps / 3;

  SimState sim;
  sim.rng = NoiseSource(sc.seed);
  sim.pzt_command = sc.pzt_command;
  sim.pzt_actual = sc.pzt_command;
  NoiseSource pzt_rng(sc.seed ^ 0x9E3779B97F4A7C15ULL);

  NullResult result;
  result.records.reserve(static_cast<std::size_t>(steps));
  PidState pid_state;
  double delta_v = 0.0;

  for (long i = 0; i < steps; ++i) {
    ForceBreakdown forces;
    if (sc.force_model) {
      if (sc.pzt_jitter) {
        const auto pzt = pzt_actual_position(sc.pzt_command, spec.actuator, pzt_rng);
        sim.pzt_actual = pzt.position;
        result.pzt_saturated |= pzt.saturated;
      } else {
        sim.pzt_actual = std::clamp(sc.pzt_command, 0.0, spec.actuator.pzt_range);
        result.pzt_saturated |= sim.pzt_actual != sc.pzt_command;
      }
      forces = total_force(*sc.force_model, GapState{sim.pzt_actual, sc.contact_offset});
    }
    const double force = forces.total + sc.applied_force;
    const double reading = detector_read(sim.theta, spec.detector);

    if (i % parts.controller_every == 0) {
      const auto r = pid_step(sc.pid, pid_state, reading, parts.pid_dt);
      pid_state = r.state;
      delta_v = r.output;
      result.output_saturated |= r.saturated;
      if (pid_state.integral < sc.pid.integral_min || pid_state.integral > sc.pid.integral_max) {
        throw NumericalError("integrator escaped its clamp bounds");
      }
    }

    result.records.push_back({sim.t, reading, delta_v, sim.theta, force});
    if (trace) trace({sim.t, sim.theta, sim.omega, sim.pzt_actual, reading, forces});

    double torque = force * arm - feedback_torque(delta_v, spec.actuator, spec.balance, sc.mode);
    if (sc.thermal_noise && sc.temperature > 0.0) {
      torque += thermal_torque_sample(spec.balance, parts.plant.stiffness, sc.temperature, sc.dt,
                                      sim.rng);
    }
    parts.propagator.advance(sim.theta, sim.omega, torque);
    sim.t = static_cast<double>(i + 1) * sc.dt;

    if (!std::isfinite(sim.theta) || (i >= settle && std::fabs(sim.theta) > divergence_limit)) {
      throw InstabilityError("feedback loop diverged at t = " + std::to_string(sim.t) +
                             " s (|theta| beyond 100x the detector resolution; " +
                             sc.pid.describe() + ")");
    }
  }

  const std::size_t first = result.records.size() - result.records.size() / 3;
  const auto tail = std::span(result.records).subspan(first);
  double sum_v = 0.0, sum_t = 0.0;
  for (const auto& r : tail) {
    sum_v += r.delta_v;
    sum_t += r.theta;
  }
  const double n = static_cast<double>(tail.size());
  result.steady_delta_v = sum_v / n;
  result.steady_theta = sum_t / n;
  double ss_t = 0.0, ss_v = 0.0;
  for (const auto& r : tail) {
    ss_t += r.theta * r.theta;
    ss_v += (r.delta_v - result.steady_delta_v) * (r.delta_v - result.steady_delta_v);
  }
  result.settled_theta_rms = std::sqrt(ss_t / n);
  result.settled_delta_v_rms = std::sqrt(ss_v / n);
  return result;
}

}  // namespace torsionlab
