#include "torsionlab/sensitivity.hpp"

#include <cmath>
#include <string>

#include "torsionlab/errors.hpp"

namespace torsionlab {

using namespace constants;

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be positive");
}
void require_non_negative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be non-negative");
}

}  // namespace

double thermal_angle_noise(double stiffness, double temperature) {
  require_positive(stiffness, "stiffness");
  require_non_negative(temperature, "temperature");
  return std::sqrt(kBoltzmann * temperature / stiffness);
}

double swing_angle_noise(double mass, double length, double temperature) {
  require_positive(mass, "mass");
  require_positive(length, "pendulum length");
  require_non_negative(temperature, "temperature");
  return std::sqrt(kBoltzmann * temperature / (mass * kStandardGravity * length));
}

double force_resolution_from_angle(double stiffness, double min_angle, double arm) {
  require_positive(stiffness, "stiffness");
  require_non_negative(min_angle, "minimum angle");
  require_positive(arm, "arm");
  return stiffness * min_angle / arm;
}

double jitter_force_floor(ForceComponent model, double radius, double gap, double jitter,
                          const JitterParams& params) {
  require_positive(radius, "radius");
  require_positive(gap, "gap");
  require_non_negative(jitter, "jitter");
  switch (model) {
    case ForceComponent::kElectrostatic:
      return electrostatic_force_pfa(radius, params.voltage, 0.0, gap) / gap * jitter;
    case ForceComponent::kPatch:
      return params.patch_exponent * patch_force(radius, gap, params.voltage, params.patch_exponent) /
             gap * jitter;
    case ForceComponent::kCasimirThermal:
      return 2.0 * casimir_force_thermal(radius, gap, params.temperature) / gap * jitter;
    case ForceComponent::kCasimirIdeal:
      return 3.0 * casimir_force_ideal(radius, gap).newtons / gap * jitter;
  }
  throw DomainError("unknown force model");
}

double max_thermal_casimir_distance(double radius, double temperature, double min_force) {
  require_positive(radius, "radius");
  require_positive(temperature, "temperature");
  require_positive(min_force, "minimum force");
  return std::sqrt(kApery * kBoltzmann * temperature * radius / (8.0 * min_force));
}

SensitivityInputs SensitivityInputs::from_instrument(const InstrumentSpec& spec, double temperature,
                                                     double patch_voltage) {
  SensitivityInputs in;
  in.stiffness = spec.stiffness();
  in.temperature = temperature;
  in.mass = spec.balance.mass;
  in.pendulum_length = spec.balance.pendulum_length;
  in.casimir_arm = spec.balance.casimir_arm;
  in.min_angle = 0.1e-6;
  in.radius = spec.sphere.radius;
  in.voltage = patch_voltage;
  in.jitter = spec.actuator.pzt_accuracy;
  in.gap = 1e-6;
  return in;
}

SensitivityReport build_report(const SensitivityInputs& in) {
  std::string missing;
  auto need = [&](const std::optional<double>& v, const char* name) {
    if (!v) missing += missing.empty() ? name : std::string(", ") + name;
  };
  need(in.stiffness, "stiffness");
  need(in.temperature, "temperature");
  need(in.mass, "mass");
  need(in.pendulum_length, "pendulum_length");
  need(in.casimir_arm, "casimir_arm");
  need(in.min_angle, "min_angle");
  need(in.radius, "radius");
  need(in.voltage, "voltage");
  need(in.jitter, "jitter");
  need(in.gap, "gap");
  if (!missing.empty()) throw ConfigError("sensitivity budget is missing: " + missing);

  SensitivityReport r;
  r.inputs = in;
  r.delta_theta_min = *in.min_angle;
  r.delta_theta_thermal = thermal_angle_noise(*in.stiffness, *in.temperature);
  r.delta_theta_swing = swing_angle_noise(*in.mass, *in.pendulum_length, *in.temperature);
  r.force_resolution = force_resolution_from_angle(*in.stiffness, *in.min_angle, *in.casimir_arm);

  JitterParams jp;
  jp.voltage = *in.voltage;
  jp.temperature = *in.temperature;
  bool below = true;
  for (auto model : {ForceComponent::kElectrostatic, ForceComponent::kPatch,
                     ForceComponent::kCasimirThermal, ForceComponent::kCasimirIdeal}) {
    if (!in.thermal_model && model == ForceComponent::kCasimirThermal) continue;
    JitterFloor jf{model, jitter_force_floor(model, *in.radius, *in.gap, *in.jitter, jp),
                   jitter_force_floor(model, *in.radius, *in.gap, 10.0 * *in.jitter, jp)};
    if (model != ForceComponent::kCasimirIdeal) below = below && jf.force_worst_case < 1e-12;
    r.jitter_floors.push_back(jf);
  }
  r.worst_case_jitter_below_1pN = below;

  if (in.thermal_model && r.force_resolution > 0.0) {
    r.d_max_thermal = max_thermal_casimir_distance(*in.radius, *in.temperature, r.force_resolution);
  }
  r.thermal_margin =
      r.delta_theta_thermal > 0.0 ? r.delta_theta_min / r.delta_theta_thermal : INFINITY;
  r.thermal_below_resolution = r.delta_theta_thermal < r.delta_theta_min;
  r.swing_negligible = r.delta_theta_swing < 0.01 * r.delta_theta_min;
  return r;
}

}  // namespace torsionlab
