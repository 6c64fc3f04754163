#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "harness/commands.hpp"
#include "harness/io.hpp"
#include "harness/scenario.hpp"
#include "harness/units.hpp"
#include "torsionlab/errors.hpp"

using namespace torsionlab;
using namespace torsionlab::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::path(testing::TempDir()) / ("torsionlab_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::string& cmd, CommandOptions opt) {
  std::ostringstream out, err;
  const int code = run_command(cmd, opt, out, err);
  return {code, out.str(), err.str()};
}

// Value of `key` in a two-column key,value CSV report.
double report_value(const fs::path& csv, const std::string& key) {
  std::istringstream in(slurp(csv));
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + ",", 0) == 0) return std::stod(line.substr(key.size() + 1));
  }
  ADD_FAILURE() << key << " missing from " << csv;
  return std::nan("");
}

}  // namespace

TEST(Units, ExactConversions) {
  UnitInfo u{};
  ASSERT_TRUE(lookup_unit("um", u));
  EXPECT_EQ(to_si(76, u), 7.6e-05);
  ASSERT_TRUE(lookup_unit("pN", u));
  EXPECT_EQ(to_si(100, u), 1e-10);
  ASSERT_TRUE(lookup_unit("mV/urad", u));
  EXPECT_EQ(u.dimension, Dimension::kDetectorSensitivity);
  EXPECT_EQ(to_si(0.5, u), 0.5);
  ASSERT_TRUE(lookup_unit("V/rad", u));
  EXPECT_EQ(to_si(500, u), 0.5);
  ASSERT_TRUE(lookup_unit("GPa", u));
  EXPECT_EQ(to_si(180, u), 1.8e11);
  EXPECT_FALSE(lookup_unit("furlong", u));
}

TEST(Scenario, EmptyFileGivesDefaults) {
  const auto s = parse_scenario("");
  EXPECT_EQ(serialize_scenario(s), serialize_scenario(Scenario{}));
  EXPECT_EQ(s.instrument.fiber.diameter, 76e-6);
  EXPECT_EQ(s.instrument.sphere.radius, 0.155);
}

TEST(Scenario, SectionsCommentsAndQualifiedKeys) {
  const auto s = parse_scenario(
      "# header comment\n"
      "[fiber]\n"
      "diameter = 152 um   # doubled\n"
      "length = 20 cm\n"
      "\n"
      "calibration.positions = 1, 2, 3, 4.5 um\n"
      "[sphere]\n"
      "material = \"gold # coated\"\n"
      "[forces]\n"
      "components = casimir_ideal, patch\n"
      "[run]\n"
      "seed = 12345678901234\n");
  EXPECT_EQ(s.instrument.fiber.diameter, 1.52e-4);
  EXPECT_EQ(s.instrument.fiber.length, 0.2);
  EXPECT_NEAR(torsion_constant(s.instrument.fiber) / torsion_constant(FiberSpec{}), 16.0, 1e-12);
  ASSERT_EQ(s.calibration.positions.size(), 4u);
  EXPECT_EQ(s.calibration.positions[3], 4.5e-6);
  EXPECT_EQ(s.instrument.sphere.material, "gold # coated");
  EXPECT_TRUE(s.forces.enabled.contains(ForceComponent::kPatch));
  EXPECT_FALSE(s.forces.enabled.contains(ForceComponent::kElectrostatic));
  EXPECT_EQ(s.seed, 12345678901234u);
}

TEST(Scenario, Errors) {
  auto expect_error = [](const std::string& text, const std::string& fragment, int line) {
    try {
      parse_scenario(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
      EXPECT_EQ(e.line(), line) << e.what();
    }
  };
  expect_error("[fiber]\nlength = -1 m\n", "fiber.length", 0);
  expect_error("[fiber]\nthickness = 1 m\n", "unknown key 'fiber.thickness'", 2);
  expect_error("[fibre]\n", "unknown section", 1);
  expect_error("fiber.diameter = 76\n", "needs a length unit", 1);
  expect_error("fiber.diameter = 76 V\n", "expected length", 1);
  expect_error("fiber.diameter = 76 parsecs\n", "unknown unit", 1);
  expect_error("\n\nfiber.diameter = 76 um\nfiber.diameter = 70 um\n", "duplicate", 4);
  expect_error("balance.quality_factor = 10 s\n", "dimensionless", 1);
  expect_error("simulate.thermal_noise = yes\n", "true or false", 1);
  expect_error("just some words\n", "key = value", 1);
  expect_error("run.seed = -3\n", "integer", 1);
  expect_error("simulate.actuator_mode = cubic\n", "linear or quadratic", 1);
  expect_error("forces.components = gravity\n", "gravity", 1);

  try {
    parse_scenario("[fiber]\n  diameter =   7x um\n");
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_EQ(e.column(), 16);
  }
}

TEST(Scenario, RoundTripIsLossless) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Scenario s;
  s.instrument.fiber.diameter *= u(rng);
  s.instrument.balance.quality_factor = 10.0;
  s.pid.kp *= u(rng);
  s.forces.voltages.minimizing = 0.1 * u(rng);
  s.forces.enabled = {ForceComponent::kCasimirThermal};
  s.calibration.voltages = {-0.1, 0.1 / 3.0, 0.2};
  s.simulate.mode = ActuatorMode::kQuadratic;
  s.budget.radii = {45e-6, 0.155};
  s.instrument.detector.quantization_mV = 0.0;
  s.instrument.sphere.material = "polystyrene";
  s.seed = 987654321;
  const auto text = serialize_scenario(s);
  const auto back = parse_scenario(text);
  EXPECT_EQ(serialize_scenario(back), text);
  EXPECT_EQ(back.instrument.fiber.diameter, s.instrument.fiber.diameter);
  EXPECT_EQ(back.pid.kp, s.pid.kp);
  EXPECT_EQ(back.calibration.voltages, s.calibration.voltages);
  EXPECT_EQ(back.forces.enabled, s.forces.enabled);
  EXPECT_EQ(scenario_hash(back), scenario_hash(s));
}

TEST(Scenario, HashStableUnderReorderingAndOutputDir) {
  const auto a = parse_scenario("fiber.length = 30 cm\nrun.seed = 4\nsphere.radius = 1.1 mm\n");
  const auto b = parse_scenario("[sphere]\nradius = 1100 um\n[run]\nseed = 4\noutput_dir = elsewhere\n[fiber]\nlength = 0.3 m\n");
  EXPECT_EQ(scenario_hash(a), scenario_hash(b));
  const auto c = parse_scenario("fiber.length = 31 cm\nrun.seed = 4\nsphere.radius = 1.1 mm\n");
  EXPECT_NE(scenario_hash(a), scenario_hash(c));
}

TEST(Scenario, EveryKeyDocumented) {
  const auto keys = scenario_keys();
  EXPECT_GT(keys.size(), 60u);
  for (const auto& [k, kind] : keys) {
    EXPECT_NE(k.find('.'), std::string::npos);
    EXPECT_FALSE(kind.empty());
  }
}

TEST(Io, FormatNumberRoundTrips) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::pow(10.0, u(rng)) * (i % 2 ? 1 : -1);
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(1e-10), "1e-10");
  EXPECT_EQ(format_number(0.25), "0.25");
}

TEST(Io, CsvShape) {
  CsvTable t({"a", "b"});
  t.add_row({1.0, 2.5});
  const double row[] = {3.0, -4.0};
  t.add_row(row);
  EXPECT_EQ(t.text(), "a,b\n1,2.5\n3,-4\n");
}

TEST(Io, ReadCsvChecksHeader) {
  const auto dir = scratch("csv");
  spit(dir / "ok.csv", "x,y\n1,2\n3,4\n");
  const std::vector<std::string> header{"x", "y"};
  const auto data = read_csv(dir / "ok.csv", header);
  ASSERT_EQ(data.rows.size(), 2u);
  EXPECT_EQ(data.rows[1][0], 3.0);
  spit(dir / "swapped.csv", "y,x\n1,2\n");
  try {
    read_csv(dir / "swapped.csv", header);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("expected header 'x,y'"), std::string::npos);
  }
  spit(dir / "short.csv", "x,y\n1\n");
  EXPECT_THROW(read_csv(dir / "short.csv", header), ConfigError);
  spit(dir / "text.csv", "x,y\n1,abc\n");
  EXPECT_THROW(read_csv(dir / "text.csv", header), ConfigError);
}

TEST(Io, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Commands, SimulateIsDeterministicAndManifestVerifies) {
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  const auto cfg = scratch("sim_cfg") / "noisy.cfg";
  spit(cfg, "[simulate]\nthermal_noise = true\npzt_jitter = true\n[run]\nseed = 31\n");
  CommandOptions opt;
  opt.config = cfg;
  opt.out = a;
  ASSERT_EQ(run("simulate", opt).code, kExitOk);
  opt.out = b;
  ASSERT_EQ(run("simulate", opt).code, kExitOk);
  EXPECT_EQ(slurp(a / "loop.csv"), slurp(b / "loop.csv"));
  EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
  EXPECT_TRUE(verify_manifest(a).empty());
  spit(a / "loop.csv", "tampered\n");
  const auto bad = verify_manifest(a);
  ASSERT_EQ(bad.size(), 1u);
  EXPECT_EQ(bad[0], "loop.csv");

  opt.seed = 32;
  opt.out = scratch("sim_c");
  ASSERT_EQ(run("simulate", opt).code, kExitOk);
  EXPECT_NE(slurp(*opt.out / "loop.csv"), slurp(b / "loop.csv"));
}

TEST(Commands, SimulateMatchesControlRun) {
  const auto dir = scratch("sim_consistent");
  spit(dir / "s.cfg", "detector.quantization = 0 mV\n");
  CommandOptions opt;
  opt.config = dir / "s.cfg";
  opt.out = dir / "out";
  opt.format = OutputFormat::kCsv;
  ASSERT_EQ(run("simulate", opt).code, kExitOk);

  NullScenario sc;
  sc.instrument.detector.quantization_mV = 0.0;
  sc.applied_force = 100e-12;
  const auto direct = run_null_measurement(sc);
  EXPECT_EQ(report_value(dir / "out" / "summary.csv", "steady_deltaV_V"), direct.steady_delta_v);
  EXPECT_EQ(slurp(dir / "out" / "loop.csv").substr(0, 40), "t_s,error_mV,deltaV_V,theta_rad,F_ext_N\n");
}

TEST(Commands, UnstableGainsExitWithInstability) {
  const auto dir = scratch("unstable");
  spit(dir / "s.cfg", "[control]\nkp = -2 V/mV\n");
  CommandOptions opt;
  opt.config = dir / "s.cfg";
  opt.out = dir / "out";
  const auto r = run("simulate", opt);
  EXPECT_EQ(r.code, kExitInstability);
  EXPECT_NE(r.err.find("kp=-2"), std::string::npos) << r.err;
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
}

TEST(Commands, ConfigErrorsExitTwo) {
  const auto dir = scratch("badcfg");
  spit(dir / "s.cfg", "fiber.length = -1 m\n");
  CommandOptions opt;
  opt.config = dir / "s.cfg";
  EXPECT_EQ(run("budget", opt).code, kExitConfig);
  opt.config = dir / "missing.cfg";
  EXPECT_EQ(run("budget", opt).code, kExitConfig);
  EXPECT_EQ(run("dance", CommandOptions{}).code, kExitIo);
}

TEST(Commands, NoiselessCalibrationRecoversInjection) {
  const auto dir = scratch("cal");
  spit(dir / "s.cfg",
       "detector.quantization = 0 mV\n"
       "[calibration]\nthermal_noise = false\npzt_jitter = false\n");
  CommandOptions opt;
  opt.config = dir / "s.cfg";
  opt.out = dir / "out";
  opt.format = OutputFormat::kCsv;
  const auto r = run("calibrate", opt);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const double beta = true_calibration_factor(ActuatorSpec{}, BalanceSpec{});
  EXPECT_NEAR(report_value(dir / "out" / "calibration.csv", "d0_m"), 10e-6, 1e-8);
  EXPECT_NEAR(report_value(dir / "out" / "calibration.csv", "beta_N_per_V") / beta, 1.0, 1e-3);
  for (const char* f : {"sweeps.csv", "fits.csv", "v0_profile.csv", "scenario.cfg", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }

  // Feeding the emitted sweeps back as measured data reproduces the analysis.
  CommandOptions again;
  again.config = dir / "s.cfg";
  again.input = dir / "out" / "sweeps.csv";
  again.out = dir / "replay";
  again.format = OutputFormat::kCsv;
  ASSERT_EQ(run("calibrate", again).code, kExitOk);
  EXPECT_EQ(slurp(dir / "replay" / "calibration.csv"), slurp(dir / "out" / "calibration.csv"));
}

TEST(Commands, CalibrationFailuresKeepPartialOutputs) {
  const auto dir = scratch("cal_fail");
  spit(dir / "wrong.csv", "V_V,d_r_m,deltaV_V\n0,1e-6,0\n");
  CommandOptions opt;
  opt.input = dir / "wrong.csv";
  opt.out = dir / "a";
  const auto r = run("calibrate", opt);
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("d_r_m,V_V,deltaV_V"), std::string::npos);

  spit(dir / "two.cfg", "calibration.positions = 1, 2 um\n");
  CommandOptions two;
  two.config = dir / "two.cfg";
  two.out = dir / "b";
  const auto t = run("calibrate", two);
  EXPECT_EQ(t.code, kExitNumerical);
  EXPECT_NE(t.err.find("at least 4"), std::string::npos) << t.err;
  EXPECT_TRUE(fs::exists(dir / "b" / "sweeps.csv"));
  EXPECT_TRUE(fs::exists(dir / "b" / "fits.csv"));
  EXPECT_TRUE(verify_manifest(dir / "b").empty());
}

TEST(Commands, BudgetAtLowerTemperature) {
  const auto dir = scratch("budget");
  spit(dir / "cold.cfg", "forces.temperature = 200 K\n");
  CommandOptions hot, cold;
  hot.out = dir / "hot";
  hot.format = cold.format = OutputFormat::kCsv;
  cold.config = dir / "cold.cfg";
  cold.out = dir / "cold";
  ASSERT_EQ(run("budget", hot).code, kExitOk);
  ASSERT_EQ(run("budget", cold).code, kExitOk);
  const double s = std::sqrt(200.0 / 300.0);
  auto ratio = [&](const std::string& key) {
    return report_value(dir / "cold" / "budget.csv", key) / report_value(dir / "hot" / "budget.csv", key);
  };
  EXPECT_NEAR(ratio("delta_theta_thermal_rad"), s, 1e-12);
  EXPECT_NEAR(ratio("delta_theta_swing_rad"), s, 1e-12);
  EXPECT_NEAR(ratio("d_max_thermal_m"), s, 1e-12);
  EXPECT_NEAR(ratio("jitter_floor_casimir_thermal_N"), 200.0 / 300.0, 1e-12);
  EXPECT_NEAR(ratio("force_resolution_N"), 1.0, 1e-15);

  // Radius sweep over the sample presets is monotone in reach.
  std::istringstream in(slurp(dir / "hot" / "radius_sweep.csv"));
  std::string line;
  std::getline(in, line);
  double last = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    const double reach = std::stod(line.substr(line.find(',') + 1));
    EXPECT_GT(reach, last);
    last = reach;
    ++rows;
  }
  EXPECT_EQ(rows, 12);
}

TEST(Commands, Michelson) {
  const auto dir = scratch("michelson");
  CommandOptions opt;
  opt.out = dir / "syn";
  opt.format = OutputFormat::kCsv;
  ASSERT_EQ(run("michelson", opt).code, kExitOk);
  EXPECT_NEAR(report_value(dir / "syn" / "michelson.csv", "gain_m_per_V") / 100e-9, 1.0, 1e-3);
  EXPECT_EQ(report_value(dir / "syn" / "michelson.csv", "fringe_displacement_m"), 316.4e-9);

  spit(dir / "vis.cfg", "michelson.visibility = 0.92\nmichelson.noise = 0.01\n");
  opt.config = dir / "vis.cfg";
  opt.out = dir / "vis";
  ASSERT_EQ(run("michelson", opt).code, kExitOk);
  EXPECT_NEAR(report_value(dir / "vis" / "michelson.csv", "visibility"), 0.92, 0.01);

  std::string flat = "V_pzt_V,intensity\n";
  for (int i = 0; i < 50; ++i) flat += std::to_string(i * 0.1) + ",1\n";
  spit(dir / "flat.csv", flat);
  CommandOptions f;
  f.input = dir / "flat.csv";
  f.out = dir / "flat";
  EXPECT_EQ(run("michelson", f).code, kExitNumerical);
}

TEST(Commands, SweepIndependentOfWorkerCount) {
  const auto dir = scratch("sweep");
  spit(dir / "one.cfg", "run.workers = 1\nsimulate.thermal_noise = true\n");
  spit(dir / "four.cfg", "run.workers = 4\nsimulate.thermal_noise = true\n");
  CommandOptions a, b;
  a.config = dir / "one.cfg";
  a.out = dir / "one";
  b.config = dir / "four.cfg";
  b.out = dir / "four";
  ASSERT_EQ(run("sweep", a).code, kExitOk);
  ASSERT_EQ(run("sweep", b).code, kExitOk);
  EXPECT_EQ(slurp(dir / "one" / "sweep.csv"), slurp(dir / "four" / "sweep.csv"));
}

TEST(Scenario, TemplateMatchesDefaults) {
  const auto s = load_scenario(fs::path(TORSIONLAB_SOURCE_DIR) / "configs" / "default.cfg");
  EXPECT_EQ(serialize_scenario(s), serialize_scenario(Scenario{}));
}

TEST(Units, DecimalPrefixesRoundCorrectly) {
  UnitInfo u{};
  ASSERT_TRUE(lookup_unit("urad", u));
  EXPECT_EQ(to_si(0.1, u), 1e-7);
  ASSERT_TRUE(lookup_unit("nm", u));
  EXPECT_EQ(to_si(632.8, u), 632.8e-9);
  EXPECT_EQ(to_si(0.2, u), 0.2e-9);
  ASSERT_TRUE(lookup_unit("mV", u));
  EXPECT_EQ(to_si(-70, u), -0.07);
  ASSERT_TRUE(lookup_unit("kPa", u));
  EXPECT_EQ(to_si(1.5e-3, u), 1.5);
}
