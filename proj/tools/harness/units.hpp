#pragma once

// Unit-suffixed quantities for scenario files. Every dimensioned value must
// carry a unit; bare numbers are accepted only for dimensionless keys.

#include <string>
#include <string_view>
#include <vector>

namespace torsionlab::harness {

enum class Dimension {
  kDimensionless,
  kLength,
  kArea,
  kMass,
  kInertia,
  kPressure,
  kVoltage,
  kTemperature,
  kTime,
  kForce,
  kAngle,
  kDetectorSensitivity,  // mV per urad
  kProportionalGain,     // V per mV
  kIntegralGain,         // V per (mV s)
  kDerivativeGain,       // V s per mV
  kActuatorGain,         // m per V
};

std::string_view dimension_name(Dimension d);
/// The SI (or canonical) unit used when writing a dimension back out.
std::string_view canonical_unit(Dimension d);
/// Accepted spellings, for error messages.
std::vector<std::string_view> accepted_units(Dimension d);

struct UnitInfo {
  Dimension dimension;
  int decimal_exponent;  // value_SI = value * 10^exponent * multiplier
  double multiplier;
};

/// Looks a unit symbol up in the table; returns false when unknown.
bool lookup_unit(std::string_view symbol, UnitInfo& out);

/// Decimal-prefixed units convert with correct rounding ("0.1 urad" is 1e-07).
double to_si(double value, const UnitInfo& unit);

}  // namespace torsionlab::harness
