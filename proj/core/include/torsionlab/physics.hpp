#pragma once

// Physical constants, instrument configuration, and closed-form sphere-plane
// force models. All quantities are SI; attractive forces are positive.

#include <array>
#include <initializer_list>
#include <string>
#include <string_view>

namespace torsionlab {

namespace constants {
inline constexpr double kBoltzmann = 1.380649e-23;        // J/K (exact)
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m (CODATA 2018)
inline constexpr double kHbar = 1.054571817e-34;          // J s
inline constexpr double kSpeedOfLight = 299792458.0;      // m/s (exact)
inline constexpr double kStandardGravity = 9.80665;       // m/s^2
inline constexpr double kApery = 1.2020569031595942854;   // zeta(3)
inline constexpr double kPi = 3.14159265358979323846;
}  // namespace constants

struct FiberSpec {
  double torsion_modulus = 1.8e11;  // Pa (tungsten)
  double diameter = 76e-6;          // m
  double length = 0.20;             // m

  /// Throws DomainError on non-positive fields.
  void validate() const;
  /// D/L > 0.01 breaks the thin-fiber assumption; reported, not rejected.
  bool slenderness_warning() const { return diameter / length > 0.01; }
};

/// Balance body. The moment of inertia default is the uniform-rod value
/// m (2 r_arm)^2 / 12 for the default mass and arm.
struct BalanceSpec {
  double mass = 0.0973;                 // kg
  double casimir_arm = 0.10;            // m, fiber axis to Casimir plate
  double feedback_arm = 0.10;           // m, fiber axis to feedback plate
  double pendulum_length = 0.20;        // m, swing length
  double moment_of_inertia = 0.0973 * 0.2 * 0.2 / 12.0;  // kg m^2
  double quality_factor = 1000.0;       // vacuum default; 10 is typical at ambient

  void validate() const;
  /// True when I is more than a decade away from m * casimir_arm^2.
  bool inertia_warning() const;
};

struct SphereSpec {
  double radius = 0.155;  // m
  std::string material = "BK quartz, Au coated";

  void validate() const;
};

/// Radius-of-curvature presets for the available samples.
struct SpherePreset {
  std::string_view family;
  double radius;
};
inline constexpr std::array<SpherePreset, 12> kSpherePresets{{
    {"BK quartz", 0.103},
    {"BK quartz", 0.155},
    {"BK quartz", 0.309},
    {"BK quartz", 1.545},
    {"diode lens", 0.55e-3},
    {"diode lens", 1.10e-3},
    {"diode lens", 1.65e-3},
    {"diode lens", 2.75e-3},
    {"polystyrene bead", 45e-6},
    {"polystyrene bead", 110e-6},
    {"polystyrene bead", 380e-6},
    {"polystyrene bead", 600e-6},
}};

/// Absolute gap from the actuator's relative coordinate: d = d0 - d_r.
struct GapState {
  double relative_position = 0.0;  // d_r, m
  double contact_offset = 1e-6;    // d0, m

  double gap() const { return contact_offset - relative_position; }
  static GapState at_gap(double d) { return GapState{0.0, d}; }
};

struct VoltageState {
  double applied = 0.0;     // V
  double minimizing = 0.0;  // V0, V
  double patch_rms = 5e-3;  // V

  void validate() const;
};

enum class ForceComponent : unsigned { kElectrostatic = 1u, kCasimirIdeal = 2u, kCasimirThermal = 4u, kPatch = 8u };

std::string_view to_string(ForceComponent c);
/// Parses "electrostatic", "casimir_ideal", "casimir_thermal", "patch".
ForceComponent parse_force_component(std::string_view name);

class ComponentSet {
 public:
  constexpr ComponentSet() = default;
  constexpr ComponentSet(std::initializer_list<ForceComponent> cs) {
    for (auto c : cs) bits_ |= static_cast<unsigned>(c);
  }
  static constexpr ComponentSet all() {
    return {ForceComponent::kElectrostatic, ForceComponent::kCasimirIdeal,
            ForceComponent::kCasimirThermal, ForceComponent::kPatch};
  }
  constexpr bool contains(ForceComponent c) const { return (bits_ & static_cast<unsigned>(c)) != 0; }
  constexpr void insert(ForceComponent c) { bits_ |= static_cast<unsigned>(c); }
  constexpr void erase(ForceComponent c) { bits_ &= ~static_cast<unsigned>(c); }
  constexpr bool operator==(const ComponentSet&) const = default;

 private:
  unsigned bits_ = 0;
};

struct ForceModelParams {
  SphereSpec sphere;
  VoltageState voltages;
  double temperature = 300.0;  // K
  ComponentSet enabled = ComponentSet::all();
  double patch_exponent = 1.0;
  bool exact_electrostatics = false;  // bispherical series instead of PFA

  void validate() const;
};

/// Angular spring constant of a round fiber, pi Z D^4 / (32 L).
double torsion_constant(const FiberSpec& fiber);

/// Proximity-force sphere-plane electrostatic force pi R eps0 (V - V0)^2 / d.
double electrostatic_force_pfa(double radius, double voltage, double v0, double gap);

/// Exact force between a sphere and a grounded plane from the bispherical
/// capacitance series
///   C(d) = 4 pi eps0 R sinh(u) sum_{n>=1} 1/sinh(n u),  cosh(u) = 1 + d/R,
/// with F = -1/2 (V - V0)^2 dC/dd. The derivative is summed term by term
/// analytically in extended precision.
double electrostatic_force_exact(double radius, double voltage, double v0, double gap);

/// Capacitance of the sphere-plane pair from the same series.
double sphere_plane_capacitance(double radius, double gap);

struct CasimirForce {
  double newtons = 0.0;
  bool pfa_warning = false;  // d/R > 0.1
};

/// Zero-temperature ideal-conductor PFA value pi^3 hbar c R / (360 d^3).
CasimirForce casimir_force_ideal(double radius, double gap);

/// High-temperature limit zeta(3) k_B T R / (8 d^2).
double casimir_force_thermal(double radius, double gap, double temperature);

/// Residual patch force pi R eps0 V_patch^2 d_ref^(n-1) / d^n with d_ref = 1 um.
double patch_force(double radius, double gap, double v_patch, double exponent);

inline constexpr double kPatchReferenceGap = 1e-6;

struct ForceBreakdown {
  double electrostatic = 0.0;
  double casimir_ideal = 0.0;
  double casimir_thermal = 0.0;
  double patch = 0.0;
  double total = 0.0;
  bool pfa_warning = false;

  double component(ForceComponent c) const;
};

ForceBreakdown total_force(const ForceModelParams& params, const GapState& gap);

}  // namespace torsionlab
