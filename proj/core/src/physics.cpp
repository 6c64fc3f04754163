#include "torsionlab/physics.hpp"

#include <cmath>
#include <string>

#include "torsionlab/errors.hpp"

namespace torsionlab {
namespace {

using namespace constants;

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw DomainError(std::string(name) + " must be positive and finite (got " +
                      std::to_string(value) + ")");
  }
}

void require_non_negative(double value, const char* name) {
  if (!(value >= 0.0) || !std::isfinite(value)) {
    throw DomainError(std::string(name) + " must be non-negative and finite (got " +
                      std::to_string(value) + ")");
  }
}

constexpr long kMaxSeriesTerms = 1'000'000;
constexpr long double kSeriesTolerance = 1e-15L;

// acosh(1 + x) without forming 1 + x, which loses digits for x << 1.
long double acosh1p(long double x) { return std::log1p(x + std::sqrt(x * (2.0L + x))); }

}  // namespace

void FiberSpec::validate() const {
  require_positive(torsion_modulus, "fiber.torsion_modulus");
  require_positive(diameter, "fiber.diameter");
  require_positive(length, "fiber.length");
}

void BalanceSpec::validate() const {
  require_positive(mass, "balance.mass");
  require_positive(casimir_arm, "balance.casimir_arm");
  require_positive(feedback_arm, "balance.feedback_arm");
  require_positive(pendulum_length, "balance.pendulum_length");
  require_positive(moment_of_inertia, "balance.moment_of_inertia");
  require_positive(quality_factor, "balance.quality_factor");
}

bool BalanceSpec::inertia_warning() const {
  const double scale = mass * casimir_arm * casimir_arm;
  const double ratio = moment_of_inertia / scale;
  return ratio > 10.0 || ratio < 0.1;
}

void SphereSpec::validate() const { require_positive(radius, "sphere.radius"); }

void VoltageState::validate() const {
  require_non_negative(patch_rms, "voltages.patch_rms");
  if (!std::isfinite(applied) || !std::isfinite(minimizing)) {
    throw DomainError("voltages must be finite");
  }
}

std::string_view to_string(ForceComponent c) {
  switch (c) {
    case ForceComponent::kElectrostatic: return "electrostatic";
    case ForceComponent::kCasimirIdeal: return "casimir_ideal";
    case ForceComponent::kCasimirThermal: return "casimir_thermal";
    case ForceComponent::kPatch: return "patch";
  }
  return "unknown";
}

ForceComponent parse_force_component(std::string_view name) {
  for (auto c : {ForceComponent::kElectrostatic, ForceComponent::kCasimirIdeal,
                 ForceComponent::kCasimirThermal, ForceComponent::kPatch}) {
    if (to_string(c) == name) return c;
  }
  throw DomainError("unknown force component '" + std::string(name) + "'");
}

void ForceModelParams::validate() const {
  sphere.validate();
  voltages.validate();
  require_positive(temperature, "temperature");
  if (!(patch_exponent >= 1.0 && patch_exponent <= 4.0)) {
    throw DomainError("patch exponent must lie in [1, 4]");
  }
}

double torsion_constant(const FiberSpec& fiber) {
  fiber.validate();
  const double d2 = fiber.diameter * fiber.diameter;
  return kPi * fiber.torsion_modulus * d2 * d2 / (32.0 * fiber.length);
}

double electrostatic_force_pfa(double radius, double voltage, double v0, double gap) {
  require_positive(radius, "radius");
  require_positive(gap, "gap");
  const double dv = voltage - v0;
  return kPi * radius * kVacuumPermittivity * dv * dv / gap;
}

double sphere_plane_capacitance(double radius, double gap) {
  require_positive(radius, "radius");
  require_positive(gap, "gap");
  const long double u = acosh1p(static_cast<long double>(gap) / radius);
  long double sum = 0.0L;
  for (long n = 1; n <= kMaxSeriesTerms; ++n) {
    const long double term = 1.0L / std::sinh(n * u);
    sum += term;
    if (term < kSeriesTolerance * sum) {
      return static_cast<double>(4.0L * kPi * kVacuumPermittivity * radius * std::sinh(u) * sum);
    }
  }
  throw NumericalError("capacitance series did not converge within 1e6 terms (d/R = " +
                       std::to_string(gap / radius) + ")");
}

double electrostatic_force_exact(double radius, double voltage, double v0, double gap) {
  require_positive(radius, "radius");
  require_positive(gap, "gap");
  const double dv = voltage - v0;
  if (dv == 0.0) return 0.0;

  const long double u = acosh1p(static_cast<long double>(gap) / radius);
  const long double sinh_u = std::sinh(u);
  // d/du [sinh u / sinh nu] = [sinh((n-1)u) - (n-1) sinh u cosh(nu)] / sinh^2(nu).
  // Terms grow roughly as n u / 3 before decaying, so termination waits for n u > 1.
  long double sum = 0.0L;
  for (long n = 2; n <= kMaxSeriesTerms; ++n) {
    const long double nu = n * u;
    const long double sh = std::sinh(nu);
    const long double numer = std::sinh((n - 1) * u) - (n - 1) * sinh_u * std::cosh(nu);
    const long double term = numer / (sh * sh);
    sum += term;
    if (nu > 1.0L && std::fabs(term) < kSeriesTolerance * std::fabs(sum)) {
      const long double dc_du = 4.0L * kPi * kVacuumPermittivity * radius * sum;
      const long double dc_dd = dc_du / (radius * sinh_u);
      return static_cast<double>(-0.5L * dv * dv * dc_dd);
    }
  }
  throw NumericalError("force series did not converge within 1e6 terms (d/R = " +
                       std::to_string(gap / radius) + ")");
}

CasimirForce casimir_force_ideal(double radius, double gap) {
  require_positive(radius, "radius");
  require_positive(gap, "gap");
  const double d3 = gap * gap * gap;
  return {kPi * kPi * kPi * kHbar * kSpeedOfLight * radius / (360.0 * d3), gap / radius > 0.1};
}

double casimir_force_thermal(double radius, double gap, double temperature) {
  require_positive(radius, "radius");
  require_positive(gap, "gap");
  require_positive(temperature, "temperature");
  return kApery * kBoltzmann * temperature * radius / (8.0 * gap * gap);
}

double patch_force(double radius, double gap, double v_patch, double exponent) {
  require_positive(radius, "radius");
  require_positive(gap, "gap");
  require_non_negative(v_patch, "patch voltage");
  if (!(exponent >= 1.0 && exponent <= 4.0)) throw DomainError("patch exponent must lie in [1, 4]");
  const double scale = exponent == 1.0 ? 1.0 / gap
                                       : std::pow(kPatchReferenceGap, exponent - 1.0) /
                                             std::pow(gap, exponent);
  return kPi * radius * kVacuumPermittivity * v_patch * v_patch * scale;
}

double ForceBreakdown::component(ForceComponent c) const {
  switch (c) {
    case ForceComponent::kElectrostatic: return electrostatic;
    case ForceComponent::kCasimirIdeal: return casimir_ideal;
    case ForceComponent::kCasimirThermal: return casimir_thermal;
    case ForceComponent::kPatch: return patch;
  }
  return 0.0;
}

ForceBreakdown total_force(const ForceModelParams& params, const GapState& gap_state) {
  params.validate();
  const double d = gap_state.gap();
  require_positive(d, "gap");
  const double radius = params.sphere.radius;
  const auto& v = params.voltages;

  ForceBreakdown out;
  if (params.enabled.contains(ForceComponent::kElectrostatic)) {
    out.electrostatic = params.exact_electrostatics
                            ? electrostatic_force_exact(radius, v.applied, v.minimizing, d)
                            : electrostatic_force_pfa(radius, v.applied, v.minimizing, d);
  }
  if (params.enabled.contains(ForceComponent::kCasimirIdeal)) {
    const auto cas = casimir_force_ideal(radius, d);
    out.casimir_ideal = cas.newtons;
    out.pfa_warning = cas.pfa_warning;
  }
  if (params.enabled.contains(ForceComponent::kCasimirThermal)) {
    out.casimir_thermal = casimir_force_thermal(radius, d, params.temperature);
  }
  if (params.enabled.contains(ForceComponent::kPatch)) {
    out.patch = patch_force(radius, d, v.patch_rms, params.patch_exponent);
  }
  out.total = out.electrostatic + out.casimir_ideal + out.casimir_thermal + out.patch;
  return out;
}

}  // namespace torsionlab
