#include "harness/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "harness/io.hpp"
#include "harness/units.hpp"
#include "torsionlab/errors.hpp"

namespace torsionlab::harness {
namespace {

struct Token {
  std::string text;
  int line = 0;
  int column = 0;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(const Token& tok, const std::string& what) {
  throw ConfigError(what, tok.line, tok.column);
}

std::string unit_hint(Dimension dim) {
  std::string s;
  for (auto u : accepted_units(dim)) {
    if (!s.empty()) s += ", ";
    s += u;
  }
  return s;
}

// "<number> [unit]" -> number and unit text.
std::pair<double, std::string> split_quantity(const Token& tok, std::string_view text) {
  text = trim(text);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr == text.data()) {
    fail(tok, "expected a number, found '" + std::string(text) + "'");
  }
  const auto unit = trim(std::string_view(res.ptr, text.data() + text.size() - res.ptr));
  return {value, std::string(unit)};
}

double convert(const Token& tok, double value, const std::string& unit, Dimension dim) {
  if (dim == Dimension::kDimensionless) {
    if (!unit.empty()) fail(tok, "dimensionless value must not carry a unit (found '" + unit + "')");
    return value;
  }
  if (unit.empty()) {
    fail(tok, "value needs a " + std::string(dimension_name(dim)) + " unit (one of: " +
                  unit_hint(dim) + ")");
  }
  UnitInfo info{};
  if (!lookup_unit(unit, info)) {
    fail(tok, "unknown unit '" + unit + "'; expected " + std::string(dimension_name(dim)) +
                  " (one of: " + unit_hint(dim) + ")");
  }
  if (info.dimension != dim) {
    fail(tok, "unit '" + unit + "' is " + std::string(dimension_name(info.dimension)) +
                  ", expected " + std::string(dimension_name(dim)) + " (one of: " +
                  unit_hint(dim) + ")");
  }
  return to_si(value, info);
}

double parse_number(const Token& tok, Dimension dim) {
  const auto [v, unit] = split_quantity(tok, tok.text);
  return convert(tok, v, unit, dim);
}

// "1, 2, 3 um" (shared unit) or "1 um, 2 um".
std::vector<double> parse_list(const Token& tok, Dimension dim) {
  std::vector<std::pair<double, std::string>> items;
  std::string_view rest = trim(tok.text);
  if (rest.empty()) return {};
  while (true) {
    const auto comma = rest.find(',');
    items.push_back(split_quantity(tok, rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  const std::string shared = items.back().second;
  std::vector<double> out;
  for (auto& [v, unit] : items) out.push_back(convert(tok, v, unit.empty() ? shared : unit, dim));
  return out;
}

bool parse_bool(const Token& tok) {
  if (tok.text == "true") return true;
  if (tok.text == "false") return false;
  fail(tok, "expected true or false, found '" + tok.text + "'");
}

std::uint64_t parse_integer(const Token& tok) {
  std::uint64_t v = 0;
  const auto* end = tok.text.data() + tok.text.size();
  const auto res = std::from_chars(tok.text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    fail(tok, "expected a non-negative integer, found '" + tok.text + "'");
  }
  return v;
}

std::string parse_string(const Token& tok) {
  const std::string& t = tok.text;
  if (t.size() >= 2 && t.front() == '"' && t.back() == '"') return t.substr(1, t.size() - 2);
  if (t.find('"') != std::string::npos) fail(tok, "unbalanced quotes");
  return t;
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

std::string render_number(double v, Dimension dim) {
  const auto unit = canonical_unit(dim);
  return unit.empty() ? format_number(v) : format_number(v) + " " + std::string(unit);
}

std::string render_list(const std::vector<double>& values, Dimension dim) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ", ";
    s += format_number(values[i]);
  }
  const auto unit = canonical_unit(dim);
  if (!values.empty() && !unit.empty()) s += " " + std::string(unit);
  return s;
}

struct Field {
  std::string key;
  std::string kind;  // documentation
  std::function<void(Scenario&, const Token&)> assign;
  std::function<std::string(const Scenario&)> render;
};

using Accessor = std::function<double&(Scenario&)>;

Field number(std::string key, Dimension dim, std::function<double&(Scenario&)> ref) {
  return {std::move(key), std::string(dimension_name(dim)),
          [dim, ref](Scenario& s, const Token& t) { ref(s) = parse_number(t, dim); },
          [dim, ref](const Scenario& s) { return render_number(ref(const_cast<Scenario&>(s)), dim); }};
}

Field list(std::string key, Dimension dim, std::function<std::vector<double>&(Scenario&)> ref) {
  return {std::move(key), "list of " + std::string(dimension_name(dim)),
          [dim, ref](Scenario& s, const Token& t) { ref(s) = parse_list(t, dim); },
          [dim, ref](const Scenario& s) { return render_list(ref(const_cast<Scenario&>(s)), dim); }};
}

Field boolean(std::string key, std::function<bool&(Scenario&)> ref) {
  return {std::move(key), "boolean",
          [ref](Scenario& s, const Token& t) { ref(s) = parse_bool(t); },
          [ref](const Scenario& s) -> std::string {
            return ref(const_cast<Scenario&>(s)) ? "true" : "false";
          }};
}

const std::vector<Field>& registry() {
  using D = Dimension;
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(number("fiber.torsion_modulus", D::kPressure, [](Scenario& s) -> double& { return s.instrument.fiber.torsion_modulus; }));
    f.push_back(number("fiber.diameter", D::kLength, [](Scenario& s) -> double& { return s.instrument.fiber.diameter; }));
    f.push_back(number("fiber.length", D::kLength, [](Scenario& s) -> double& { return s.instrument.fiber.length; }));

    f.push_back(number("balance.mass", D::kMass, [](Scenario& s) -> double& { return s.instrument.balance.mass; }));
    f.push_back(number("balance.casimir_arm", D::kLength, [](Scenario& s) -> double& { return s.instrument.balance.casimir_arm; }));
    f.push_back(number("balance.feedback_arm", D::kLength, [](Scenario& s) -> double& { return s.instrument.balance.feedback_arm; }));
    f.push_back(number("balance.pendulum_length", D::kLength, [](Scenario& s) -> double& { return s.instrument.balance.pendulum_length; }));
    f.push_back(number("balance.moment_of_inertia", D::kInertia, [](Scenario& s) -> double& { return s.instrument.balance.moment_of_inertia; }));
    f.push_back(number("balance.quality_factor", D::kDimensionless, [](Scenario& s) -> double& { return s.instrument.balance.quality_factor; }));

    f.push_back(number("sphere.radius", D::kLength, [](Scenario& s) -> double& { return s.instrument.sphere.radius; }));
    f.push_back({"sphere.material", "string",
                 [](Scenario& s, const Token& t) { s.instrument.sphere.material = parse_string(t); },
                 [](const Scenario& s) { return quote(s.instrument.sphere.material); }});

    f.push_back(number("detector.sensitivity", D::kDetectorSensitivity, [](Scenario& s) -> double& { return s.instrument.detector.sensitivity_mV_per_urad; }));
    // The detector works in millivolts internally.
    f.push_back({"detector.quantization", "voltage",
                 [](Scenario& s, const Token& t) { s.instrument.detector.quantization_mV = parse_number(t, D::kVoltage) * 1e3; },
                 [](const Scenario& s) { return render_number(s.instrument.detector.quantization_mV / 1e3, D::kVoltage); }});

    f.push_back(number("actuator.pzt_accuracy", D::kLength, [](Scenario& s) -> double& { return s.instrument.actuator.pzt_accuracy; }));
    f.push_back(number("actuator.pzt_range", D::kLength, [](Scenario& s) -> double& { return s.instrument.actuator.pzt_range; }));
    f.push_back(number("actuator.stage_resolution", D::kLength, [](Scenario& s) -> double& { return s.instrument.actuator.stage_resolution; }));
    f.push_back(number("actuator.fb_plate_area", D::kArea, [](Scenario& s) -> double& { return s.instrument.actuator.fb_plate_area; }));
    f.push_back(number("actuator.fb_gap", D::kLength, [](Scenario& s) -> double& { return s.instrument.actuator.fb_gap; }));
    f.push_back(number("actuator.fb_bias", D::kVoltage, [](Scenario& s) -> double& { return s.instrument.actuator.fb_bias; }));

    f.push_back(number("forces.applied_voltage", D::kVoltage, [](Scenario& s) -> double& { return s.forces.voltages.applied; }));
    f.push_back(number("forces.v0", D::kVoltage, [](Scenario& s) -> double& { return s.forces.voltages.minimizing; }));
    f.push_back(number("forces.v_patch", D::kVoltage, [](Scenario& s) -> double& { return s.forces.voltages.patch_rms; }));
    f.push_back(number("forces.temperature", D::kTemperature, [](Scenario& s) -> double& { return s.forces.temperature; }));
    f.push_back(number("forces.patch_exponent", D::kDimensionless, [](Scenario& s) -> double& { return s.forces.patch_exponent; }));
    f.push_back(boolean("forces.exact_electrostatics", [](Scenario& s) -> bool& { return s.forces.exact_electrostatics; }));
    f.push_back({"forces.components", "list of force components",
                 [](Scenario& s, const Token& t) {
                   ComponentSet set;
                   std::string_view rest = trim(t.text);
                   while (!rest.empty()) {
                     const auto comma = rest.find(',');
                     const auto name = trim(rest.substr(0, comma));
                     try {
                       set.insert(parse_force_component(name));
                     } catch (const DomainError& e) {
                       fail(t, e.what());
                     }
                     if (comma == std::string_view::npos) break;
                     rest = rest.substr(comma + 1);
                   }
                   s.forces.enabled = set;
                 },
                 [](const Scenario& s) {
                   std::string out;
                   for (auto c : {ForceComponent::kCasimirIdeal, ForceComponent::kCasimirThermal,
                                  ForceComponent::kElectrostatic, ForceComponent::kPatch}) {
                     if (!s.forces.enabled.contains(c)) continue;
                     if (!out.empty()) out += ", ";
                     out += to_string(c);
                   }
                   return out;
                 }});

    f.push_back(number("control.kp", D::kProportionalGain, [](Scenario& s) -> double& { return s.pid.kp; }));
    f.push_back(number("control.ki", D::kIntegralGain, [](Scenario& s) -> double& { return s.pid.ki; }));
    f.push_back(number("control.kd", D::kDerivativeGain, [](Scenario& s) -> double& { return s.pid.kd; }));
    f.push_back(number("control.derivative_filter", D::kTime, [](Scenario& s) -> double& { return s.pid.derivative_filter; }));
    f.push_back(number("control.output_min", D::kVoltage, [](Scenario& s) -> double& { return s.pid.output_min; }));
    f.push_back(number("control.output_max", D::kVoltage, [](Scenario& s) -> double& { return s.pid.output_max; }));
    f.push_back(number("control.integral_min", D::kVoltage, [](Scenario& s) -> double& { return s.pid.integral_min; }));
    f.push_back(number("control.integral_max", D::kVoltage, [](Scenario& s) -> double& { return s.pid.integral_max; }));
    f.push_back(number("control.sample_interval", D::kTime, [](Scenario& s) -> double& { return s.pid.sample_interval; }));

    f.push_back(number("simulate.applied_force", D::kForce, [](Scenario& s) -> double& { return s.simulate.applied_force; }));
    f.push_back(number("simulate.duration", D::kTime, [](Scenario& s) -> double& { return s.simulate.duration; }));
    f.push_back(number("simulate.dt", D::kTime, [](Scenario& s) -> double& { return s.simulate.dt; }));
    f.push_back(boolean("simulate.thermal_noise", [](Scenario& s) -> bool& { return s.simulate.thermal_noise; }));
    f.push_back(boolean("simulate.pzt_jitter", [](Scenario& s) -> bool& { return s.simulate.pzt_jitter; }));
    f.push_back(boolean("simulate.use_force_model", [](Scenario& s) -> bool& { return s.simulate.use_force_model; }));
    f.push_back(number("simulate.pzt_command", D::kLength, [](Scenario& s) -> double& { return s.simulate.pzt_command; }));
    f.push_back(number("simulate.contact_offset", D::kLength, [](Scenario& s) -> double& { return s.simulate.contact_offset; }));
    f.push_back({"simulate.actuator_mode", "linear | quadratic",
                 [](Scenario& s, const Token& t) {
                   if (t.text == "linear") {
                     s.simulate.mode = ActuatorMode::kLinear;
                   } else if (t.text == "quadratic") {
                     s.simulate.mode = ActuatorMode::kQuadratic;
                   } else {
                     fail(t, "actuator_mode must be linear or quadratic, found '" + t.text + "'");
                   }
                 },
                 [](const Scenario& s) -> std::string {
                   return s.simulate.mode == ActuatorMode::kLinear ? "linear" : "quadratic";
                 }});

    f.push_back(list("calibration.positions", D::kLength, [](Scenario& s) -> std::vector<double>& { return s.calibration.positions; }));
    f.push_back(list("calibration.voltages", D::kVoltage, [](Scenario& s) -> std::vector<double>& { return s.calibration.voltages; }));
    f.push_back(number("calibration.contact_offset", D::kLength, [](Scenario& s) -> double& { return s.calibration.contact_offset; }));
    f.push_back(number("calibration.v0_offset", D::kVoltage, [](Scenario& s) -> double& { return s.calibration.v0_offset; }));
    f.push_back(number("calibration.v0_log_slope", D::kVoltage, [](Scenario& s) -> double& { return s.calibration.v0_log_slope; }));
    f.push_back(number("calibration.duration", D::kTime, [](Scenario& s) -> double& { return s.calibration.duration; }));
    f.push_back(boolean("calibration.thermal_noise", [](Scenario& s) -> bool& { return s.calibration.thermal_noise; }));
    f.push_back(boolean("calibration.pzt_jitter", [](Scenario& s) -> bool& { return s.calibration.pzt_jitter; }));

    f.push_back(list("sweep.forces", D::kForce, [](Scenario& s) -> std::vector<double>& { return s.sweep.forces; }));

    f.push_back(number("budget.min_angle", D::kAngle, [](Scenario& s) -> double& { return s.budget.min_angle; }));
    f.push_back(number("budget.gap", D::kLength, [](Scenario& s) -> double& { return s.budget.gap; }));
    f.push_back(boolean("budget.thermal_model", [](Scenario& s) -> bool& { return s.budget.thermal_model; }));
    f.push_back(list("budget.radii", D::kLength, [](Scenario& s) -> std::vector<double>& { return s.budget.radii; }));

    f.push_back(number("michelson.wavelength", D::kLength, [](Scenario& s) -> double& { return s.michelson.wavelength; }));
    f.push_back(number("michelson.gain", D::kActuatorGain, [](Scenario& s) -> double& { return s.michelson.gain; }));
    f.push_back(number("michelson.visibility", D::kDimensionless, [](Scenario& s) -> double& { return s.michelson.visibility; }));
    f.push_back(number("michelson.fringes", D::kDimensionless, [](Scenario& s) -> double& { return s.michelson.fringes; }));
    f.push_back(number("michelson.noise", D::kDimensionless, [](Scenario& s) -> double& { return s.michelson.noise; }));
    f.push_back(number("michelson.phase", D::kAngle, [](Scenario& s) -> double& { return s.michelson.phase; }));
    f.push_back({"michelson.samples", "integer",
                 [](Scenario& s, const Token& t) {
                   const auto v = parse_integer(t);
                   if (v > 10'000'000) fail(t, "michelson.samples is unreasonably large");
                   s.michelson.samples = static_cast<int>(v);
                 },
                 [](const Scenario& s) { return std::to_string(s.michelson.samples); }});

    f.push_back({"run.seed", "integer",
                 [](Scenario& s, const Token& t) { s.seed = parse_integer(t); },
                 [](const Scenario& s) { return std::to_string(s.seed); }});
    f.push_back({"run.output_dir", "string",
                 [](Scenario& s, const Token& t) { s.output_dir = parse_string(t); },
                 [](const Scenario& s) { return quote(s.output_dir); }});
    f.push_back({"run.workers", "integer",
                 [](Scenario& s, const Token& t) {
                   const auto v = parse_integer(t);
                   if (v > 1024) fail(t, "run.workers must be at most 1024");
                   s.workers = static_cast<unsigned>(v);
                 },
                 [](const Scenario& s) { return std::to_string(s.workers); }});

    std::sort(f.begin(), f.end(), [](const Field& a, const Field& b) { return a.key < b.key; });
    return f;
  }();
  return fields;
}

const Field* find_field(std::string_view key) {
  const auto& f = registry();
  const auto it = std::lower_bound(f.begin(), f.end(), key,
                                   [](const Field& a, std::string_view k) { return a.key < k; });
  return (it != f.end() && it->key == key) ? &*it : nullptr;
}

bool known_section(std::string_view section) {
  for (const auto& f : registry()) {
    if (f.key.compare(0, section.size(), section) == 0 && f.key.size() > section.size() &&
        f.key[section.size()] == '.') {
      return true;
    }
  }
  return false;
}

// Strips a '#' comment that is not inside quotes.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

template <typename Fn>
void wrap_domain(Fn&& fn) {
  try {
    fn();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid scenario: ") + e.what());
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid scenario: " + what);
}

}  // namespace

void Scenario::validate() const {
  wrap_domain([&] {
    instrument.validate();
    forces.validate();
    pid.validate();
  });
  if (instrument.fiber.slenderness_warning()) {
    // Thin-fiber formula loses accuracy; still a valid configuration.
  }
  require(simulate.duration > 0.0, "simulate.duration must be positive");
  require(simulate.dt > 0.0, "simulate.dt must be positive");
  require(simulate.contact_offset > 0.0, "simulate.contact_offset must be positive");
  require(calibration.duration > 0.0, "calibration.duration must be positive");
  require(calibration.contact_offset > 0.0, "calibration.contact_offset must be positive");
  for (double f : sweep.forces) require(std::isfinite(f), "sweep.forces must be finite");
  require(budget.min_angle >= 0.0, "budget.min_angle must be non-negative");
  require(budget.gap > 0.0, "budget.gap must be positive");
  for (double r : budget.radii) require(r > 0.0, "budget.radii must be positive");
  require(michelson.wavelength > 0.0, "michelson.wavelength must be positive");
  require(michelson.gain > 0.0, "michelson.gain must be positive");
  require(michelson.visibility > 0.0 && michelson.visibility <= 1.0,
          "michelson.visibility must lie in (0, 1]");
  require(michelson.fringes > 0.0, "michelson.fringes must be positive");
  require(michelson.samples >= 8, "michelson.samples must be at least 8");
  require(michelson.noise >= 0.0, "michelson.noise must be non-negative");
}

NullScenario Scenario::null_scenario() const {
  NullScenario sc;
  sc.instrument = instrument;
  sc.pid = pid;
  sc.mode = simulate.mode;
  sc.applied_force = simulate.applied_force;
  if (simulate.use_force_model) sc.force_model = forces;
  sc.pzt_command = simulate.pzt_command;
  sc.contact_offset = simulate.contact_offset;
  sc.temperature = forces.temperature;
  sc.thermal_noise = simulate.thermal_noise;
  sc.pzt_jitter = simulate.pzt_jitter;
  sc.duration = simulate.duration;
  sc.dt = simulate.dt;
  sc.seed = seed;
  return sc;
}

CalibrationScenario Scenario::calibration_scenario() const {
  CalibrationScenario sc;
  sc.loop = null_scenario();
  sc.loop.mode = ActuatorMode::kLinear;
  sc.loop.duration = calibration.duration;
  sc.loop.thermal_noise = calibration.thermal_noise;
  sc.loop.pzt_jitter = calibration.pzt_jitter;
  sc.forces = forces;
  sc.contact_offset = calibration.contact_offset;
  sc.v0_profile = log_v0_profile(calibration.v0_offset, calibration.v0_log_slope);
  sc.workers = workers;
  return sc;
}

Scenario parse_scenario(std::string_view text, std::string_view origin) {
  Scenario s;
  std::set<std::string> seen;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const int indent = static_cast<int>(raw.find_first_not_of(" \t")) + 1;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no, indent);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_section(section)) {
        throw ConfigError("unknown section [" + section + "]", line_no, indent);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("expected 'key = value'", line_no, indent);
    }
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("missing key before '='", line_no, indent);
    const std::string full = section.empty() || key.find('.') != std::string::npos
                                 ? key
                                 : section + "." + key;
    const Field* field = find_field(full);
    if (!field) throw ConfigError("unknown key '" + full + "'", line_no, indent);
    if (!seen.insert(full).second) throw ConfigError("duplicate key '" + full + "'", line_no, indent);

    const auto value_offset = raw.find('=') + 1;
    const auto value_start = raw.find_first_not_of(" \t", value_offset);
    Token tok{std::string(trim(line.substr(eq + 1))), line_no,
              static_cast<int>(value_start == std::string_view::npos ? value_offset : value_start) + 1};
    field->assign(s, tok);
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(origin) + ": " + e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str(), path.string());
  } catch (const ConfigError& e) {
    if (e.line() > 0) throw ConfigError(path.string() + ": " + e.what());
    throw;
  }
}

std::string serialize_scenario(const Scenario& scenario) {
  std::string out;
  for (const auto& f : registry()) {
    out += f.key + " = " + f.render(scenario) + "\n";
  }
  return out;
}

std::string scenario_hash(const Scenario& scenario) {
  Scenario copy = scenario;
  copy.output_dir.clear();
  return sha256_hex(serialize_scenario(copy));
}

std::vector<std::pair<std::string, std::string>> scenario_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : registry()) out.emplace_back(f.key, f.kind);
  return out;
}

}  // namespace torsionlab::harness
