#pragma once

// Scenario configuration: everything a run needs, loadable from a
// unit-suffixed key/value file and serializable back losslessly.
//
//   # comment
//   [fiber]
//   diameter = 76 um
//   length = 20 cm
//   [calibration]
//   positions = 1, 2, 3, 4, 5, 6, 7, 8 um
//
// Keys may also be written fully qualified ("fiber.diameter = 76 um").

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "torsionlab/calibration.hpp"
#include "torsionlab/control.hpp"
#include "torsionlab/dynamics.hpp"
#include "torsionlab/physics.hpp"

namespace torsionlab::harness {

struct SimulateSchedule {
  double applied_force = 100e-12;  // N
  double duration = 300.0;         // s
  double dt = 0.05;                // s
  bool thermal_noise = false;
  bool pzt_jitter = false;
  bool use_force_model = false;
  double pzt_command = 0.0;       // m
  double contact_offset = 10e-6;  // m
  ActuatorMode mode = ActuatorMode::kLinear;
};

struct CalibrationSchedule {
  std::vector<double> positions{1e-6, 2e-6, 3e-6, 4e-6, 5e-6, 6e-6, 7e-6, 8e-6};
  std::vector<double> voltages{-0.100, -0.070, -0.040, -0.010, 0.020, 0.050, 0.080, 0.110, 0.140};
  double contact_offset = 10e-6;  // injected d0
  double v0_offset = 20e-3;       // V
  double v0_log_slope = 5e-3;     // V per decade of gap
  double duration = 240.0;
  bool thermal_noise = true;
  bool pzt_jitter = true;
};

struct SweepSchedule {
  std::vector<double> forces{1e-12, 3e-12, 10e-12, 30e-12, 100e-12, 300e-12, 1e-9};
};

struct BudgetSchedule {
  double min_angle = 0.1e-6;  // rad
  double gap = 1e-6;          // m
  bool thermal_model = true;
  std::vector<double> radii;  // empty -> the sample presets
};

struct MichelsonSchedule {
  double wavelength = kHeNeWavelength;
  double gain = 100e-9;  // m / V, synthetic traces only
  double visibility = 0.95;
  double fringes = 6.0;
  int samples = 600;
  double noise = 0.0;
  double phase = 0.3;
};

struct Scenario {
  InstrumentSpec instrument;
  ForceModelParams forces;
  PidConfig pid;
  SimulateSchedule simulate;
  CalibrationSchedule calibration;
  SweepSchedule sweep;
  BudgetSchedule budget;
  MichelsonSchedule michelson;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  unsigned workers = 0;

  /// Throws ConfigError describing the first invalid field.
  void validate() const;
  NullScenario null_scenario() const;
  CalibrationScenario calibration_scenario() const;
};

/// Parses scenario text. `origin` labels error messages.
Scenario parse_scenario(std::string_view text, std::string_view origin = "<config>");
Scenario load_scenario(const std::filesystem::path& path);

/// Canonical form: keys sorted, SI units, shortest round-trip numbers.
std::string serialize_scenario(const Scenario& scenario);

/// SHA-256 of the canonical form without run.output_dir (hex).
std::string scenario_hash(const Scenario& scenario);

/// All recognised keys with their dimension, for documentation and errors.
std::vector<std::pair<std::string, std::string>> scenario_keys();

}  // namespace torsionlab::harness
