#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "torsionlab/calibration.hpp"
#include "torsionlab/control.hpp"
#include "torsionlab/dynamics.hpp"
#include "torsionlab/physics.hpp"

using namespace torsionlab;

static void BM_PropagatorAdvance(benchmark::State& state) {
  const InstrumentSpec spec;
  const auto plant = Plant::from(spec);
  const Propagator prop(plant, max_time_step(plant));
  double theta = 1e-6, omega = 0.0;
  for (auto _ : state) {
    prop.advance(theta, omega, 1e-15);
    benchmark::DoNotOptimize(theta);
  }
}
BENCHMARK(BM_PropagatorAdvance);

static void BM_StepWithThermalNoise(benchmark::State& state) {
  const InstrumentSpec spec;
  StepOptions opt;
  opt.thermal_noise = true;
  SimState s;
  s.rng = NoiseSource(1);
  for (auto _ : state) {
    s = step(s, spec, 0.0, 0.05, opt);
    benchmark::DoNotOptimize(s.theta);
  }
}
BENCHMARK(BM_StepWithThermalNoise);

static void BM_PidStep(benchmark::State& state) {
  const PidConfig cfg;
  PidState s;
  double e = 0.3;
  for (auto _ : state) {
    const auto r = pid_step(cfg, s, e, 0.05);
    s = r.state;
    e = -0.9 * e;
    benchmark::DoNotOptimize(r.output);
  }
}
BENCHMARK(BM_PidStep);

static void BM_NullMeasurement(benchmark::State& state) {
  NullScenario sc;
  sc.applied_force = 100e-12;
  sc.thermal_noise = true;
  sc.duration = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_null_measurement(sc).steady_delta_v);
}
BENCHMARK(BM_NullMeasurement)->Arg(300)->Arg(3000)->Unit(benchmark::kMillisecond);

static void BM_ExactElectrostatics(benchmark::State& state) {
  // d/R spans 1e-2 down to 1e-6; the series length grows as sqrt(R/d).
  const double ratio = std::pow(10.0, -static_cast<double>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(electrostatic_force_exact(0.155, 1.0, 0.0, 0.155 * ratio));
}
BENCHMARK(BM_ExactElectrostatics)->DenseRange(2, 6);

static void BM_ContactPointFit(benchmark::State& state) {
  std::vector<CurvaturePoint> pts;
  for (int i = 1; i <= 8; ++i) pts.push_back({i * 1e-6, 4.87e-4 / (10e-6 - i * 1e-6) * (1 + 1e-4 * (i % 3))});
  for (auto _ : state) benchmark::DoNotOptimize(contact_point_fit(pts).d0);
}
BENCHMARK(BM_ContactPointFit);

static void BM_DecomposeResidual(benchmark::State& state) {
  std::vector<ResidualPoint> pts;
  for (int i = 0; i < 20; ++i) {
    const double d = 1e-6 * std::pow(10.0, i / 19.0);
    pts.push_back({d, 1.1e-16 / d + 4.2e-28 / (d * d * d)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(decompose_residual(pts).coefficients[0]);
}
BENCHMARK(BM_DecomposeResidual);

static void BM_MichelsonFit(benchmark::State& state) {
  const auto trace = synthesize_michelson_trace(MichelsonSynthesis{});
  for (auto _ : state) benchmark::DoNotOptimize(michelson_calibrate(trace).gain);
}
BENCHMARK(BM_MichelsonFit)->Unit(benchmark::kMicrosecond);

static void BM_Calibration(benchmark::State& state) {
  CalibrationScenario sc;
  sc.loop.duration = 240.0;
  sc.loop.thermal_noise = sc.loop.pzt_jitter = true;
  sc.forces.enabled = {ForceComponent::kElectrostatic};
  sc.v0_profile = log_v0_profile(20e-3, 5e-3);
  sc.workers = 1;
  const std::vector<double> positions{1e-6, 2e-6, 3e-6, 4e-6, 5e-6, 6e-6, 7e-6, 8e-6};
  const std::vector<double> volts{-0.1, -0.07, -0.04, -0.01, 0.02, 0.05, 0.08, 0.11, 0.14};
  for (auto _ : state) benchmark::DoNotOptimize(run_electrostatic_calibration(sc, positions, volts).beta);
}
BENCHMARK(BM_Calibration)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
