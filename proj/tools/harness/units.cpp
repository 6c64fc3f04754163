#include "harness/units.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <string>

namespace torsionlab::harness {
namespace {

struct Entry {
  std::string_view symbol;
  UnitInfo info;
};

constexpr std::array kUnits{
    Entry{"m", {Dimension::kLength, 0, 1.0}},
    Entry{"cm", {Dimension::kLength, -2, 1.0}},
    Entry{"mm", {Dimension::kLength, -3, 1.0}},
    Entry{"um", {Dimension::kLength, -6, 1.0}},
    Entry{"\xC2\xB5m", {Dimension::kLength, -6, 1.0}},  // µm
    Entry{"nm", {Dimension::kLength, -9, 1.0}},
    Entry{"pm", {Dimension::kLength, -12, 1.0}},
    Entry{"m^2", {Dimension::kArea, 0, 1.0}},
    Entry{"cm^2", {Dimension::kArea, -4, 1.0}},
    Entry{"mm^2", {Dimension::kArea, -6, 1.0}},
    Entry{"kg", {Dimension::kMass, 0, 1.0}},
    Entry{"g", {Dimension::kMass, -3, 1.0}},
    Entry{"mg", {Dimension::kMass, -6, 1.0}},
    Entry{"kg*m^2", {Dimension::kInertia, 0, 1.0}},
    Entry{"g*cm^2", {Dimension::kInertia, -7, 1.0}},
    Entry{"Pa", {Dimension::kPressure, 0, 1.0}},
    Entry{"kPa", {Dimension::kPressure, 3, 1.0}},
    Entry{"MPa", {Dimension::kPressure, 6, 1.0}},
    Entry{"GPa", {Dimension::kPressure, 9, 1.0}},
    Entry{"N/m^2", {Dimension::kPressure, 0, 1.0}},
    Entry{"V", {Dimension::kVoltage, 0, 1.0}},
    Entry{"kV", {Dimension::kVoltage, 3, 1.0}},
    Entry{"mV", {Dimension::kVoltage, -3, 1.0}},
    Entry{"uV", {Dimension::kVoltage, -6, 1.0}},
    Entry{"K", {Dimension::kTemperature, 0, 1.0}},
    Entry{"s", {Dimension::kTime, 0, 1.0}},
    Entry{"ms", {Dimension::kTime, -3, 1.0}},
    Entry{"us", {Dimension::kTime, -6, 1.0}},
    Entry{"min", {Dimension::kTime, 0, 60.0}},
    Entry{"h", {Dimension::kTime, 0, 3600.0}},
    Entry{"N", {Dimension::kForce, 0, 1.0}},
    Entry{"mN", {Dimension::kForce, -3, 1.0}},
    Entry{"uN", {Dimension::kForce, -6, 1.0}},
    Entry{"nN", {Dimension::kForce, -9, 1.0}},
    Entry{"pN", {Dimension::kForce, -12, 1.0}},
    Entry{"fN", {Dimension::kForce, -15, 1.0}},
    Entry{"rad", {Dimension::kAngle, 0, 1.0}},
    Entry{"mrad", {Dimension::kAngle, -3, 1.0}},
    Entry{"urad", {Dimension::kAngle, -6, 1.0}},
    Entry{"nrad", {Dimension::kAngle, -9, 1.0}},
    Entry{"mV/urad", {Dimension::kDetectorSensitivity, 0, 1.0}},
    Entry{"V/rad", {Dimension::kDetectorSensitivity, -3, 1.0}},
    Entry{"V/mV", {Dimension::kProportionalGain, 0, 1.0}},
    Entry{"V/(mV*s)", {Dimension::kIntegralGain, 0, 1.0}},
    Entry{"V*s/mV", {Dimension::kDerivativeGain, 0, 1.0}},
    Entry{"m/V", {Dimension::kActuatorGain, 0, 1.0}},
    Entry{"um/V", {Dimension::kActuatorGain, -6, 1.0}},
    Entry{"nm/V", {Dimension::kActuatorGain, -9, 1.0}},
};

}  // namespace

std::string_view dimension_name(Dimension d) {
  switch (d) {
    case Dimension::kDimensionless: return "dimensionless";
    case Dimension::kLength: return "length";
    case Dimension::kArea: return "area";
    case Dimension::kMass: return "mass";
    case Dimension::kInertia: return "moment of inertia";
    case Dimension::kPressure: return "pressure";
    case Dimension::kVoltage: return "voltage";
    case Dimension::kTemperature: return "temperature";
    case Dimension::kTime: return "time";
    case Dimension::kForce: return "force";
    case Dimension::kAngle: return "angle";
    case Dimension::kDetectorSensitivity: return "detector sensitivity";
    case Dimension::kProportionalGain: return "proportional gain";
    case Dimension::kIntegralGain: return "integral gain";
    case Dimension::kDerivativeGain: return "derivative gain";
    case Dimension::kActuatorGain: return "actuator gain";
  }
  return "unknown";
}

std::string_view canonical_unit(Dimension d) {
  switch (d) {
    case Dimension::kDimensionless: return "";
    case Dimension::kLength: return "m";
    case Dimension::kArea: return "m^2";
    case Dimension::kMass: return "kg";
    case Dimension::kInertia: return "kg*m^2";
    case Dimension::kPressure: return "Pa";
    case Dimension::kVoltage: return "V";
    case Dimension::kTemperature: return "K";
    case Dimension::kTime: return "s";
    case Dimension::kForce: return "N";
    case Dimension::kAngle: return "rad";
    case Dimension::kDetectorSensitivity: return "mV/urad";
    case Dimension::kProportionalGain: return "V/mV";
    case Dimension::kIntegralGain: return "V/(mV*s)";
    case Dimension::kDerivativeGain: return "V*s/mV";
    case Dimension::kActuatorGain: return "m/V";
  }
  return "";
}

std::vector<std::string_view> accepted_units(Dimension d) {
  std::vector<std::string_view> out;
  for (const auto& e : kUnits) {
    if (e.info.dimension == d) out.push_back(e.symbol);
  }
  return out;
}

bool lookup_unit(std::string_view symbol, UnitInfo& out) {
  for (const auto& e : kUnits) {
    if (e.symbol == symbol) {
      out = e.info;
      return true;
    }
  }
  return false;
}

double to_si(double value, const UnitInfo& unit) {
  if (unit.multiplier == 1.0 && unit.decimal_exponent != 0 && std::isfinite(value)) {
    // Shift the exponent of the shortest decimal form and parse once, so
    // "0.1 urad" is the correctly rounded 1e-07.
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::scientific);
    const std::string_view text(buf, static_cast<std::size_t>(res.ptr - buf));
    const auto e = text.find('e');
    int exponent = 0;
    std::from_chars(text.data() + e + 1 + (text[e + 1] == '+'), text.data() + text.size(), exponent);
    const std::string shifted =
        std::string(text.substr(0, e)) + "e" + std::to_string(exponent + unit.decimal_exponent);
    double out = 0.0;
    std::from_chars(shifted.data(), shifted.data() + shifted.size(), out);
    return out;
  }
  double v = value * unit.multiplier;
  if (unit.decimal_exponent > 0) {
    v *= std::pow(10.0, unit.decimal_exponent);
  } else if (unit.decimal_exponent < 0) {
    v /= std::pow(10.0, -unit.decimal_exponent);
  }
  return v;
}

}  // namespace torsionlab::harness
