#include "harness/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>

#include "harness/io.hpp"
#include "torsionlab/calibration.hpp"
#include "torsionlab/control.hpp"
#include "torsionlab/errors.hpp"
#include "torsionlab/parallel.hpp"
#include "torsionlab/sensitivity.hpp"

namespace torsionlab::harness {
namespace {

using Json = nlohmann::ordered_json;

struct Context {
  const Scenario& scenario;
  const CommandOptions& options;
  ArtifactWriter& writer;
  std::ostream& out;
};

// Flat key/value report, emitted as JSON or as a two-column CSV.
class Report {
 public:
  void add(const std::string& key, double value) {
    json_[key] = value;
    rows_.emplace_back(key, format_number(value));
  }
  void add(const std::string& key, bool value) {
    json_[key] = value;
    rows_.emplace_back(key, value ? "true" : "false");
  }
  void add(const std::string& key, const std::string& value) {
    json_[key] = value;
    rows_.emplace_back(key, value);
  }

  void write(Context& ctx, const std::string& stem) const {
    if (ctx.options.format == OutputFormat::kJson) {
      ctx.writer.write(stem + ".json", json_.dump(2) + "\n");
    } else {
      std::string text = "key,value\n";
      for (const auto& [k, v] : rows_) text += k + "," + v + "\n";
      ctx.writer.write(stem + ".csv", text);
    }
  }

  void print(std::ostream& os) const {
    std::size_t width = 0;
    for (const auto& r : rows_) width = std::max(width, r.first.size());
    for (const auto& [k, v] : rows_) {
      os << k << std::string(width + 2 - k.size(), ' ') << v << "\n";
    }
  }

 private:
  Json json_ = Json::object();
  std::vector<std::pair<std::string, std::string>> rows_;
};

std::string loop_csv(const NullResult& result) {
  CsvTable table({"t_s", "error_mV", "deltaV_V", "theta_rad", "F_ext_N"});
  for (const auto& r : result.records) {
    table.add_row({r.t, r.error_mV, r.delta_v, r.theta, r.applied_force});
  }
  return table.text();
}

void cmd_simulate(Context& ctx) {
  const auto sc = ctx.scenario.null_scenario();
  CsvTable trace({"t_s", "theta_rad", "omega_rad_s", "pzt_m", "detector_mV", "F_sphere_N"});
  const auto result = run_null_measurement(sc, [&](const TraceRow& row) {
    trace.add_row({row.t, row.theta, row.omega, row.pzt_actual, row.detector_mV, row.forces.total});
  });
  ctx.writer.write("loop.csv", loop_csv(result));
  ctx.writer.write("trace.csv", trace.text());

  const double beta = true_calibration_factor(sc.instrument.actuator, sc.instrument.balance);
  Report report;
  report.add("applied_force_N", sc.applied_force);
  report.add("steady_deltaV_V", result.steady_delta_v);
  report.add("steady_theta_rad", result.steady_theta);
  report.add("settled_theta_rms_rad", result.settled_theta_rms);
  report.add("settled_deltaV_rms_V", result.settled_delta_v_rms);
  report.add("beta_N_per_V", beta);
  report.add("inferred_force_N", beta * result.steady_delta_v);
  report.add("output_saturated", result.output_saturated);
  report.add("pzt_saturated", result.pzt_saturated);
  report.write(ctx, "summary");
  report.print(ctx.out);
}

std::vector<VoltageSweep> sweeps_from_csv(const std::filesystem::path& path) {
  static const std::vector<std::string> header{"d_r_m", "V_V", "deltaV_V"};
  const auto data = read_csv(path, header);
  std::map<double, VoltageSweep> grouped;
  for (const auto& row : data.rows) {
    auto& sweep = grouped[row[0]];
    sweep.relative_position = row[0];
    sweep.samples.push_back({row[1], row[2]});
  }
  std::vector<VoltageSweep> sweeps;
  for (auto& [d, s] : grouped) sweeps.push_back(std::move(s));
  return sweeps;
}

void write_calibration(Context& ctx, const std::vector<VoltageSweep>& sweeps,
                       const CalibrationResult& result) {
  CsvTable fits({"d_r_m", "V0_V", "V0_sigma_V", "k_V_per_V2", "k_sigma_V_per_V2", "offset_V",
                 "rms_V", "status"});
  for (const auto& p : result.positions) {
    if (p.fit) {
      const auto& f = *p.fit;
      const double row[] = {p.relative_position, f.v0, f.v0_sigma(), f.curvature,
                            f.curvature_sigma(), f.offset, f.rms_residual};
      fits.add_row(row, "ok");
    } else {
      const double nan = std::nan("");
      const double row[] = {p.relative_position, nan, nan, nan, nan, nan, nan};
      std::string status = p.failure;
      std::replace(status.begin(), status.end(), ',', ';');
      fits.add_row(row, status);
    }
  }
  ctx.writer.write("fits.csv", fits.text());

  CsvTable v0({"d_m", "V0_V", "V0_sigma_V"});
  for (const auto& p : result.v0_profile) v0.add_row({p.gap, p.v0, p.sigma});
  ctx.writer.write("v0_profile.csv", v0.text());

  Report report;
  report.add("positions", static_cast<double>(sweeps.size()));
  report.add("fitted_positions",
             static_cast<double>(std::count_if(result.positions.begin(), result.positions.end(),
                                               [](const PositionFit& p) { return p.fit.has_value(); })));
  report.add("ok", result.ok());
  if (result.ok()) {
    report.add("d0_m", result.d0);
    report.add("d0_sigma_m", std::sqrt(result.contact->covariance(0, 0)));
    report.add("prefactor_V_m_per_V2", result.contact->prefactor);
    report.add("beta_N_per_V", result.beta);
    report.add("beta_relative_spread", result.beta_relative_spread);
    report.add("force_mismatch", result.force_mismatch);
    report.add("contact_fit_iterations", static_cast<double>(result.contact->iterations));
  } else {
    report.add("contact_failure", result.contact_failure);
  }
  if (result.v0_log_model) {
    report.add("v0_log_intercept_V", result.v0_log_model->coefficients(0));
    report.add("v0_log_slope_V_per_decade", result.v0_log_model->coefficients(1));
    report.add("v0_log_rss", result.v0_log_model->rss);
  }
  if (result.v0_linear_model) {
    report.add("v0_linear_intercept_V", result.v0_linear_model->coefficients(0));
    report.add("v0_linear_slope_V_per_m", result.v0_linear_model->coefficients(1));
    report.add("v0_linear_rss", result.v0_linear_model->rss);
  }
  report.write(ctx, "calibration");
  report.print(ctx.out);
}

void cmd_calibrate(Context& ctx) {
  std::vector<VoltageSweep> sweeps;
  CalibrationResult result;
  if (ctx.options.input) {
    sweeps = sweeps_from_csv(*ctx.options.input);
    result = analyze_sweeps(sweeps, ctx.scenario.instrument.sphere.radius);
  } else {
    const auto& cal = ctx.scenario.calibration;
    result = run_electrostatic_calibration(ctx.scenario.calibration_scenario(), cal.positions,
                                           cal.voltages, &sweeps);
  }

  CsvTable table({"d_r_m", "V_V", "deltaV_V"});
  for (const auto& s : sweeps) {
    for (const auto& p : s.samples) table.add_row({s.relative_position, p.voltage, p.delta_v});
  }
  ctx.writer.write("sweeps.csv", table.text());
  write_calibration(ctx, sweeps, result);

  if (!result.ok()) {
    throw FitError(FitError::Kind::kInsufficientData,
                   "contact-point fit failed: " + result.contact_failure);
  }
}

SensitivityInputs budget_inputs(const Scenario& s, double radius) {
  auto in = SensitivityInputs::from_instrument(s.instrument, s.forces.temperature,
                                               s.forces.voltages.patch_rms);
  in.radius = radius;
  in.min_angle = s.budget.min_angle;
  in.gap = s.budget.gap;
  in.thermal_model = s.budget.thermal_model;
  return in;
}

void cmd_budget(Context& ctx) {
  const auto& s = ctx.scenario;
  const auto rep = build_report(budget_inputs(s, s.instrument.sphere.radius));

  Report report;
  report.add("stiffness_N_m_per_rad", *rep.inputs.stiffness);
  report.add("temperature_K", *rep.inputs.temperature);
  report.add("radius_m", *rep.inputs.radius);
  report.add("delta_theta_min_rad", rep.delta_theta_min);
  report.add("delta_theta_thermal_rad", rep.delta_theta_thermal);
  report.add("delta_theta_swing_rad", rep.delta_theta_swing);
  report.add("force_resolution_N", rep.force_resolution);
  for (const auto& f : rep.jitter_floors) {
    const std::string name(to_string(f.model));
    report.add("jitter_floor_" + name + "_N", f.force);
    report.add("jitter_floor_" + name + "_worst_case_N", f.force_worst_case);
  }
  if (rep.d_max_thermal) report.add("d_max_thermal_m", *rep.d_max_thermal);
  report.add("thermal_margin", rep.thermal_margin);
  report.add("thermal_below_resolution", rep.thermal_below_resolution);
  report.add("swing_negligible", rep.swing_negligible);
  report.add("worst_case_jitter_below_1pN", rep.worst_case_jitter_below_1pN);
  report.write(ctx, "budget");
  report.print(ctx.out);

  std::vector<double> radii = s.budget.radii;
  if (radii.empty()) {
    for (const auto& p : kSpherePresets) radii.push_back(p.radius);
  }
  std::sort(radii.begin(), radii.end());
  CsvTable sweep({"R_m", "d_max_thermal_m", "jitter_electrostatic_N", "jitter_casimir_thermal_N",
                  "jitter_patch_N"});
  for (double r : radii) {
    const auto row = build_report(budget_inputs(s, r));
    double floors[3] = {0.0, 0.0, 0.0};
    for (const auto& f : row.jitter_floors) {
      if (f.model == ForceComponent::kElectrostatic) floors[0] = f.force;
      if (f.model == ForceComponent::kCasimirThermal) floors[1] = f.force;
      if (f.model == ForceComponent::kPatch) floors[2] = f.force;
    }
    sweep.add_row({r, row.d_max_thermal.value_or(std::nan("")), floors[0], floors[1], floors[2]});
  }
  ctx.writer.write("radius_sweep.csv", sweep.text());
}

void cmd_michelson(Context& ctx) {
  const auto& m = ctx.scenario.michelson;
  MichelsonTrace trace;
  if (ctx.options.input) {
    static const std::vector<std::string> header{"V_pzt_V", "intensity"};
    const auto data = read_csv(*ctx.options.input, header);
    for (const auto& row : data.rows) {
      trace.voltage.push_back(row[0]);
      trace.intensity.push_back(row[1]);
    }
    trace.wavelength = m.wavelength;
  } else {
    MichelsonSynthesis syn;
    syn.gain = m.gain;
    syn.visibility = m.visibility;
    syn.fringes = m.fringes;
    syn.samples = m.samples;
    syn.phase = m.phase;
    syn.noise = m.noise;
    syn.wavelength = m.wavelength;
    syn.seed = ctx.scenario.seed;
    trace = synthesize_michelson_trace(syn);
  }

  const auto fit = michelson_calibrate(trace);
  CsvTable table({"V_pzt_V", "intensity", "model"});
  for (std::size_t i = 0; i < trace.voltage.size(); ++i) {
    const double model =
        fit.mean_intensity *
        (1.0 + fit.visibility * std::cos(4.0 * constants::kPi * fit.gain * trace.voltage[i] /
                                             trace.wavelength +
                                         fit.phase));
    table.add_row({trace.voltage[i], trace.intensity[i], model});
  }
  ctx.writer.write("michelson_trace.csv", table.text());

  Report report;
  report.add("wavelength_m", trace.wavelength);
  report.add("fringe_displacement_m", fringe_displacement(trace.wavelength));
  report.add("gain_m_per_V", fit.gain);
  report.add("visibility", fit.visibility);
  report.add("mean_intensity", fit.mean_intensity);
  report.add("phase_rad", fit.phase);
  report.add("fringe_period_V", fit.fringe_period);
  report.add("fringes", fit.fringes);
  report.add("rms_residual", fit.rms_residual);
  report.add("low_contrast", fit.low_contrast);
  report.write(ctx, "michelson");
  report.print(ctx.out);
}

void cmd_sweep(Context& ctx) {
  const auto base = ctx.scenario.null_scenario();
  const auto& forces = ctx.scenario.sweep.forces;
  if (forces.empty()) throw ConfigError("sweep.forces is empty");
  verify_loop_stability(base.instrument, base.pid, base.mode, base.dt);

  const auto results = parallel_map(forces.size(), ctx.scenario.workers, [&](std::size_t i) {
    auto sc = base;
    sc.applied_force = forces[i];
    sc.seed = derive_seed(base.seed, i);
    sc.check_stability = false;
    auto r = run_null_measurement(sc);
    r.records.clear();
    return r;
  });

  // Proportionality through the origin: slope = sum(F dV) / sum(F^2).
  double sfv = 0.0, sff = 0.0;
  for (std::size_t i = 0; i < forces.size(); ++i) {
    sfv += forces[i] * results[i].steady_delta_v;
    sff += forces[i] * forces[i];
  }
  const double slope = sff > 0.0 ? sfv / sff : 0.0;

  CsvTable table({"F_ext_N", "deltaV_V", "theta_rad", "theta_rms_rad", "deltaV_per_N",
                  "linearity_error"});
  double worst = 0.0;
  for (std::size_t i = 0; i < forces.size(); ++i) {
    const auto& r = results[i];
    const double per_n = forces[i] != 0.0 ? r.steady_delta_v / forces[i] : std::nan("");
    const double err = forces[i] != 0.0 ? per_n / slope - 1.0 : std::nan("");
    if (std::isfinite(err)) worst = std::max(worst, std::abs(err));
    table.add_row({forces[i], r.steady_delta_v, r.steady_theta, r.settled_theta_rms, per_n, err});
  }
  ctx.writer.write("sweep.csv", table.text());

  Report report;
  report.add("points", static_cast<double>(forces.size()));
  report.add("deltaV_per_N", slope);
  report.add("inferred_beta_N_per_V", slope != 0.0 ? 1.0 / slope : std::nan(""));
  report.add("true_beta_N_per_V",
             true_calibration_factor(base.instrument.actuator, base.instrument.balance));
  report.add("max_linearity_error", worst);
  report.write(ctx, "sweep_summary");
  report.print(ctx.out);
}

}  // namespace

std::string_view tool_version() { return "torsionlab 0.3.0"; }

Scenario resolve_scenario(const CommandOptions& options) {
  Scenario s = options.config ? load_scenario(*options.config) : Scenario{};
  if (options.seed) s.seed = *options.seed;
  if (options.out) s.output_dir = options.out->string();
  return s;
}

int run_command(const std::string& command, const CommandOptions& options, std::ostream& out,
                std::ostream& err) {
  using Handler = void (*)(Context&);
  static const std::map<std::string, Handler> handlers{
      {"simulate", cmd_simulate}, {"calibrate", cmd_calibrate}, {"budget", cmd_budget},
      {"michelson", cmd_michelson}, {"sweep", cmd_sweep}};
  const auto it = handlers.find(command);
  if (it == handlers.end()) {
    err << "error: unknown command '" << command << "'\n";
    return kExitIo;
  }

  Scenario scenario;
  try {
    scenario = resolve_scenario(options);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  RunManifest manifest;
  manifest.command = command;
  manifest.scenario_hash = scenario_hash(scenario);
  manifest.tool_version = std::string(tool_version());
  manifest.started_at = utc_timestamp();
  manifest.seed = scenario.seed;

  std::optional<ArtifactWriter> writer;
  try {
    writer.emplace(scenario.output_dir);
    writer->write("scenario.cfg", serialize_scenario(scenario));
  } catch (const std::exception& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  }

  int code = kExitOk;
  try {
    Context ctx{scenario, options, *writer, out};
    it->second(ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    code = kExitConfig;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    code = kExitConfig;
  } catch (const InstabilityError& e) {
    err << "instability: " << e.what() << "\n";
    code = kExitInstability;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    for (const auto& line : e.trace()) err << "  " << line << "\n";
    code = kExitNumerical;
  } catch (const std::exception& e) {
    err << "io error: " << e.what() << "\n";
    code = kExitIo;
  }

  manifest.finished_at = utc_timestamp();
  manifest.exit_code = code;
  manifest.artifacts = writer->artifacts();
  try {
    ArtifactWriter(scenario.output_dir).write("manifest.json", manifest.to_json());
  } catch (const std::exception& e) {
    err << "io error: " << e.what() << "\n";
    return code == kExitOk ? kExitIo : code;
  }
  return code;
}

}  // namespace torsionlab::harness
