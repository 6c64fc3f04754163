// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "harness/commands.hpp"
#include "harness/scenario.hpp"
#include "torsionlab/calibration.hpp"
#include "torsionlab/control.hpp"
#include "torsionlab/dynamics.hpp"
#include "torsionlab/sensitivity.hpp"

using namespace torsionlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome torsion() {
  const double a = torsion_constant(FiberSpec{});
  return {a >= 2.93e-6 && a <= 2.99e-6, fmt("alpha = %.5e N m/rad", a)};
}

Outcome angle_noise() {
  const double t = thermal_angle_noise(2.96e-6, 300.0);
  const double s = swing_angle_noise(0.0973, 0.20, 300.0);
  return {rel(t, 3.8e-8) <= 0.03 && rel(s, 1.5e-10) <= 0.05,
          fmt("thermal %.3e rad (%.1f%%), swing %.3e rad (%.1f%%)", t, 100 * rel(t, 3.8e-8), s,
              100 * rel(s, 1.5e-10))};
}

Outcome jitter_floors() {
  JitterParams p;
  const double e = jitter_force_floor(ForceComponent::kElectrostatic, 0.155, 1e-6, 0.2e-9, p);
  const double t = jitter_force_floor(ForceComponent::kCasimirThermal, 0.155, 1e-6, 0.2e-9, p);
  return {rel(e, 0.025e-12) <= 0.20 && rel(t, 0.038e-12) <= 0.05,
          fmt("electrostatic %.4f pN (%.1f%%), thermal Casimir %.4f pN (%.1f%%)", e * 1e12,
              100 * rel(e, 0.025e-12), t * 1e12, 100 * rel(t, 0.038e-12))};
}

Outcome force_resolution() {
  const double f = force_resolution_from_angle(torsion_constant(FiberSpec{}), 0.1e-6, 0.1);
  return {f <= 3e-12, fmt("resolution %.3f pN", f * 1e12)};
}

Outcome thermal_reach() {
  const double d = max_thermal_casimir_distance(0.155, 300.0, 3e-12);
  return {d >= 5e-6, fmt("d_max = %.3f um", d * 1e6)};
}

Outcome closed_loop_null() {
  NullScenario sc;
  sc.instrument.detector.quantization_mV = 0.0;
  sc.applied_force = 100e-12;
  const auto at100 = run_null_measurement(sc);
  const bool nulled = std::abs(at100.steady_theta) < 0.02e-6;

  const std::vector<double> forces{1e-12, 3e-12, 10e-12, 30e-12, 100e-12, 300e-12, 1e-9};
  std::vector<double> ratio;
  for (double f : forces) {
    sc.applied_force = f;
    ratio.push_back(run_null_measurement(sc).steady_delta_v / f);
  }
  const auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
  const double spread = (*hi - *lo) / *lo;
  return {nulled && spread < 0.01,
          fmt("|theta| = %.2e urad at 100 pN; dV/F spread %.2e over 1 pN..1 nN",
              std::abs(at100.steady_theta) * 1e6, spread)};
}

Outcome equipartition() {
  InstrumentSpec spec;
  spec.balance.quality_factor = 10.0;
  const auto plant = Plant::from(spec);
  const double dt = max_time_step(plant);
  StepOptions opt;
  opt.thermal_noise = true;
  opt.temperature = 300.0;
  SimState s;
  s.rng = NoiseSource(2718);
  double sum = 0.0;
  const long n = 1'000'000;
  for (long i = 0; i < n; ++i) {
    s = step(s, spec, 0.0, dt, opt);
    sum += s.theta * s.theta;
  }
  const double ratio = sum / n / plant.equilibrium_variance(300.0);
  return {std::abs(ratio - 1.0) <= 0.05, fmt("<theta^2> / (kT/alpha) = %.4f", ratio)};
}

Outcome calibration_round_trip() {
  const harness::Scenario defaults;
  const auto& cal = defaults.calibration;
  const double beta = true_calibration_factor(ActuatorSpec{}, BalanceSpec{});
  const auto profile = log_v0_profile(20e-3, 5e-3);

  auto sc = defaults.calibration_scenario();
  const auto noisy = run_electrostatic_calibration(sc, cal.positions, cal.voltages);
  if (!noisy.ok()) return {false, "noisy fit failed: " + noisy.contact_failure};
  double v0_err = 0.0;
  for (std::size_t i = 0; i < cal.positions.size(); ++i) {
    v0_err = std::max(v0_err, std::abs(noisy.v0_profile[i].v0 - profile(10e-6 - cal.positions[i])));
  }
  const double d0_err = std::abs(noisy.d0 - 10e-6);
  const double beta_err = rel(noisy.beta, beta);

  sc.loop.instrument.detector.quantization_mV = 0.0;
  sc.loop.thermal_noise = sc.loop.pzt_jitter = false;
  const auto clean = run_electrostatic_calibration(sc, cal.positions, cal.voltages);
  if (!clean.ok()) return {false, "noiseless fit failed: " + clean.contact_failure};
  double clean_err = std::max(rel(clean.d0, 10e-6), rel(clean.beta, beta));
  for (std::size_t i = 0; i < cal.positions.size(); ++i) {
    clean_err = std::max(clean_err, rel(clean.v0_profile[i].v0, profile(10e-6 - cal.positions[i])));
  }

  const bool pass = d0_err <= 5e-9 && v0_err <= 1e-3 && beta_err <= 5e-3 && clean_err <= 1e-3;
  return {pass, fmt("d0 err %.2f nm, max V0 err %.4f mV, beta err %.3f%%; noiseless max rel err %.1e",
                    d0_err * 1e9, v0_err * 1e3, beta_err * 100, clean_err)};
}

Outcome residual_decomposition() {
  const double c3 = casimir_force_ideal(0.155, 1e-6).newtons * 1e-18;
  const double c1 = patch_force(0.155, 1e-6, 5e-3, 1.0) * 1e-6;
  std::vector<double> e1, e3, z2;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed) + 1000);
    std::normal_distribution<double> n(0.0, 0.01);
    std::vector<ResidualPoint> pts;
    for (int i = 0; i < 20; ++i) {
      const double d = 1e-6 * std::pow(10.0, i / 19.0);
      pts.push_back({d, (c1 / d + c3 / (d * d * d)) * (1.0 + n(rng))});
    }
    const auto r = decompose_residual(pts);
    e1.push_back(rel(r.coefficients[0], c1));
    e3.push_back(rel(r.coefficients[2], c3));
    z2.push_back(std::abs(r.coefficients[1]) / r.uncertainties[1]);
  }
  const double m1 = median(e1), m3 = median(e3), mz = median(z2);
  return {m1 <= 0.05 && m3 <= 0.05 && mz < 2.0,
          fmt("median err C1 %.2f%%, C3 %.2f%%; median |C2|/sigma %.2f", m1 * 100, m3 * 100, mz)};
}

Outcome michelson() {
  MichelsonSynthesis s;
  const auto fit = michelson_calibrate(synthesize_michelson_trace(s));
  const double period = fringe_displacement(632.8e-9);
  const double err = rel(fit.gain, 100e-9);
  return {err <= 1e-3 && std::abs(period - 316.4e-9) < 1e-15,
          fmt("gain err %.2e, visibility %.4f, lambda/2 = %.1f nm", err, fit.visibility, period * 1e9)};
}

double force_of(ForceComponent m, double r, double d, const JitterParams& p) {
  switch (m) {
    case ForceComponent::kElectrostatic: return electrostatic_force_pfa(r, p.voltage, 0.0, d);
    case ForceComponent::kPatch: return patch_force(r, d, p.voltage, p.patch_exponent);
    case ForceComponent::kCasimirThermal: return casimir_force_thermal(r, d, p.temperature);
    case ForceComponent::kCasimirIdeal: return casimir_force_ideal(r, d).newtons;
  }
  return 0.0;
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> logd(std::log(0.3e-6), std::log(30e-6));
  std::uniform_real_distribution<double> logr(std::log(45e-6), std::log(1.545));
  double worst_jitter = 0.0;
  JitterParams p;
  for (int i = 0; i < 20; ++i) {
    const double d = std::exp(logd(rng)), r = std::exp(logr(rng));
    for (auto m : {ForceComponent::kElectrostatic, ForceComponent::kPatch,
                   ForceComponent::kCasimirThermal, ForceComponent::kCasimirIdeal}) {
      const double h = 1e-4 * d;
      const double fd = (force_of(m, r, d - h, p) - force_of(m, r, d + h, p)) / (2 * h) * 0.2e-9;
      worst_jitter = std::max(worst_jitter, rel(jitter_force_floor(m, r, d, 0.2e-9, p), fd));
    }
  }

  double worst_fit = 0.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ResidualPoint> pts;
    for (int i = 0; i < 10; ++i) {
      const double d = 1e-6 * std::pow(8.0, i / 9.0) * (1.0 + 0.02 * u(rng));
      pts.push_back({d, (3e-16 / d + 2e-22 / (d * d) + 4e-28 / (d * d * d)) * (0.8 + 0.4 * u(rng))});
    }
    const auto r = decompose_residual(pts);
    // Brute-force normal equations with relative weights, in micrometres.
    double g[3][3] = {}, h[3] = {};
    for (const auto& q : pts) {
      const double x = q.gap * 1e6, w = 1.0 / (q.force * q.force);
      const double phi[3] = {1 / x, 1 / (x * x), 1 / (x * x * x)};
      for (int a = 0; a < 3; ++a) {
        h[a] += w * phi[a] * q.force;
        for (int b = 0; b < 3; ++b) g[a][b] += w * phi[a] * phi[b];
      }
    }
    // Cramer's rule in long double.
    auto det = [](long double m[3][3]) {
      return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
             m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
             m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    };
    long double base[3][3];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) base[a][b] = g[a][b];
    const long double dg = det(base);
    const double scale[3] = {1e-6, 1e-12, 1e-18};
    for (int k = 0; k < 3; ++k) {
      long double m[3][3];
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) m[a][b] = b == k ? h[a] : g[a][b];
      const double c = static_cast<double>(det(m) / dg) * scale[k];
      worst_fit = std::max(worst_fit, rel(r.coefficients[static_cast<std::size_t>(k)], c));
    }
  }
  return {worst_jitter <= 1e-6 && worst_fit <= 1e-10,
          fmt("jitter vs finite difference %.1e; decomposition vs normal equations %.1e", worst_jitter,
              worst_fit)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const fs::path& work) {
  const auto cfg = work / "determinism.cfg";
  {
    std::ofstream out(cfg);
    out << "[simulate]\nthermal_noise = true\npzt_jitter = true\n[run]\nseed = 77\n";
  }
  std::ostringstream sink;
  harness::CommandOptions opt;
  opt.config = cfg;
  int codes = 0;
  for (const char* name : {"run_a", "run_b"}) {
    opt.out = work / name;
    codes |= harness::run_command("simulate", opt, sink, sink);
  }
  const auto a = slurp(work / "run_a" / "loop.csv");
  const auto b = slurp(work / "run_b" / "loop.csv");
  return {codes == 0 && !a.empty() && a == b,
          fmt("%.0f bytes, identical = %.0f", static_cast<double>(a.size()), a == b ? 1.0 : 0.0)};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "torsionlab_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);

  struct Criterion {
    const char* name;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria{
      {"torsion constant", torsion},
      {"thermal and swing angle noise", angle_noise},
      {"jitter force floors at 1 um", jitter_floors},
      {"force resolution", force_resolution},
      {"thermal Casimir reach", thermal_reach},
      {"closed-loop null and readout linearity", closed_loop_null},
      {"equipartition (Q = 10, 1e6 steps)", equipartition},
      {"calibration round trip", calibration_round_trip},
      {"residual decomposition (100 seeds)", residual_decomposition},
      {"Michelson gain and fringe period", michelson},
      {"oracle equivalence", oracle_equivalence},
      {"simulate determinism", [&] { return determinism(work); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s %2zu  %-40s %s  [%.2fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str(), secs);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
