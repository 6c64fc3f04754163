#include <gtest/gtest.h>

#include <cmath>

#include "torsionlab/dynamics.hpp"
#include "torsionlab/errors.hpp"

using namespace torsionlab;
using constants::kBoltzmann;
using constants::kPi;

namespace {

InstrumentSpec spec_with(double stiffness, double q) {
  InstrumentSpec s;
  s.stiffness_override = stiffness;
  s.balance.quality_factor = q;
  return s;
}

// <theta^2> from `runs` independent Boltzmann-initialised trajectories.
double langevin_variance(double q, int runs, long steps, std::uint64_t seed) {
  const auto spec = spec_with(torsion_constant(FiberSpec{}), q);
  const auto plant = Plant::from(spec);
  const double dt = max_time_step(plant);
  const Propagator prop(plant, dt);
  double sum = 0.0;
  long count = 0;
  for (int r = 0; r < runs; ++r) {
    NoiseSource rng(seed + static_cast<std::uint64_t>(r));
    const double var = plant.equilibrium_variance(300.0);
    double theta = std::sqrt(var) * rng.gaussian();
    double omega = std::sqrt(kBoltzmann * 300.0 / plant.inertia) * rng.gaussian();
    for (long i = 0; i < steps; ++i) {
      const double tau = thermal_torque_sample(spec.balance, plant.stiffness, 300.0, dt, rng);
      prop.advance(theta, omega, tau);
      sum += theta * theta;
      ++count;
    }
  }
  return sum / static_cast<double>(count) / plant.equilibrium_variance(300.0);
}

}  // namespace

TEST(NaturalFrequency, DefaultInertia) {
  BalanceSpec b;
  EXPECT_NEAR(b.moment_of_inertia, 3.2433e-4, 1e-8);
  const double w = natural_frequency(b, 2.96e-6);
  EXPECT_NEAR(w, 0.0955, 0.0005);
  EXPECT_NEAR(2 * kPi / w, 66.0, 0.5);
  BalanceSpec heavy = b;
  heavy.moment_of_inertia *= 4;
  EXPECT_DOUBLE_EQ(natural_frequency(heavy, 2.96e-6), 0.5 * w);
  EXPECT_THROW(natural_frequency(b, 0.0), DomainError);
}

TEST(ThermalTorque, ZeroTemperatureAndScaling) {
  BalanceSpec b;
  NoiseSource rng(3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(thermal_torque_sample(b, 2.95e-6, 0.0, 1.0, rng), 0.0);

  auto variance = [&](double t) {
    NoiseSource r(11);
    double s = 0.0;
    for (int i = 0; i < 200000; ++i) {
      const double x = thermal_torque_sample(b, 2.95e-6, t, 1.0, r);
      s += x * x;
    }
    return s / 200000;
  };
  // Same random stream, so the ratio is exact up to rounding.
  EXPECT_NEAR(variance(600.0) / variance(300.0), 2.0, 1e-12);

  const double gamma = b.moment_of_inertia * natural_frequency(b, 2.95e-6) / b.quality_factor;
  EXPECT_NEAR(variance(300.0), 2 * kBoltzmann * 300.0 * gamma, 0.01 * 2 * kBoltzmann * 300.0 * gamma);
}

TEST(Equipartition, AmbientQ) {
  EXPECT_NEAR(langevin_variance(10.0, 1, 1'000'000, 1), 1.0, 0.05);
}

TEST(Equipartition, VacuumQEnsemble) {
  // Q = 1000 decorrelates slowly; an ensemble of trajectories gives the
  // statistics a single 1e6-step run cannot.
  EXPECT_NEAR(langevin_variance(1000.0, 32, 1'000'000, 100), 1.0, 0.05);
}

TEST(Step, FreeDecayMatchesAnalyticSolution) {
  const double q = 50.0;
  const auto spec = spec_with(2.96e-6, q);
  const auto plant = Plant::from(spec);
  const double w0 = plant.natural_frequency();
  const double wd = w0 * std::sqrt(1.0 - 1.0 / (4 * q * q));
  const double dt = max_time_step(plant);
  SimState s;
  s.theta = 1e-6;
  const double g = w0 / (2 * q);
  double worst = 0.0;
  for (int i = 1; i <= 500; ++i) {
    s = step(s, spec, 0.0, dt);
    const double t = s.t;
    const double expected = 1e-6 * std::exp(-g * t) * (std::cos(wd * t) + g / wd * std::sin(wd * t));
    worst = std::max(worst, std::abs(s.theta - expected));
  }
  // 500 steps = 10 periods; error relative to the decayed envelope.
  EXPECT_LT(worst / (1e-6 * std::exp(-g * s.t)), 1e-3);
}

TEST(Step, StaticEquilibrium) {
  const auto spec = spec_with(2.96e-6, 10.0);
  const auto plant = Plant::from(spec);
  const double dt = max_time_step(plant);
  SimState s;
  const double tau = 1e-9 * spec.balance.casimir_arm;
  for (int i = 0; i < 5000; ++i) s = step(s, spec, tau, dt);
  EXPECT_LT(std::abs(s.theta / (tau / 2.96e-6) - 1.0), 1e-4);
  EXPECT_NEAR(s.theta, 33.78e-6, 0.01e-6);
  DetectorSpec det;
  EXPECT_NEAR(detector_read(s.theta, det), 16.9, 1e-9);
}

TEST(Step, StaticResponseLinearOverSixDecades) {
  const auto spec = spec_with(2.96e-6, 10.0);
  const auto plant = Plant::from(spec);
  const double dt = max_time_step(plant);
  double ref = 0.0;
  for (double tau : {1e-16, 1e-15, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10}) {
    SimState s;
    for (int i = 0; i < 8000; ++i) s = step(s, spec, tau, dt);
    const double gain = s.theta / tau;
    if (ref == 0.0) ref = gain;
    EXPECT_NEAR(gain / ref, 1.0, 1e-10) << tau;
  }
}

TEST(Step, UndampedEnergyConservation) {
  auto spec = spec_with(2.96e-6, 1.0);
  Plant plant = Plant::from(spec);
  plant.damping = 0.0;
  const double dt = max_time_step(plant);
  const Propagator prop(plant, dt);
  double theta = 1e-5, omega = 0.0;
  const double e0 = plant.energy(theta, omega);
  for (int i = 0; i < 100000; ++i) prop.advance(theta, omega, 0.0);
  EXPECT_LT(std::abs(plant.energy(theta, omega) / e0 - 1.0), 1e-6);
}

TEST(Step, OverdampedAndCriticalCasesDecayMonotonically) {
  for (double q : {0.5, 0.2}) {
    auto spec = spec_with(2.96e-6, q);
    const auto plant = Plant::from(spec);
    const Propagator prop(plant, max_time_step(plant));
    double theta = 1e-6, omega = 0.0, last = theta;
    for (int i = 0; i < 2000; ++i) {
      prop.advance(theta, omega, 0.0);
      EXPECT_LE(theta, last + 1e-30);
      EXPECT_GE(theta, 0.0);
      last = theta;
    }
  }
}

TEST(Step, RejectsLargeTimeStep) {
  const auto spec = spec_with(2.96e-6, 10.0);
  const auto plant = Plant::from(spec);
  SimState s;
  EXPECT_THROW(step(s, spec, 0.0, plant.period() / 10.0), DomainError);
  try {
    step(s, spec, 0.0, plant.period() / 10.0);
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("period/50"), std::string::npos);
  }
}

TEST(Step, DeterministicUnderSeed) {
  const auto spec = spec_with(2.96e-6, 1000.0);
  const double dt = 0.05;
  SimState a, b;
  a.rng = NoiseSource(42);
  b.rng = NoiseSource(42);
  StepOptions opt;
  opt.thermal_noise = true;
  for (int i = 0; i < 10000; ++i) {
    a = step(a, spec, 1e-13, dt, opt);
    b = step(b, spec, 1e-13, dt, opt);
  }
  EXPECT_EQ(a.theta, b.theta);
  EXPECT_EQ(a.omega, b.omega);
  EXPECT_TRUE(a.rng == b.rng);
}

TEST(Pzt, JitterStatisticsAndClamping) {
  ActuatorSpec a;
  NoiseSource rng(5);
  double s2 = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const auto p = pzt_actual_position(5e-6, a, rng);
    EXPECT_FALSE(p.saturated);
    s2 += (p.position - 5e-6) * (p.position - 5e-6);
  }
  EXPECT_NEAR(std::sqrt(s2 / 10000) / 0.2e-9, 1.0, 0.03);

  a.pzt_accuracy = 0.0;
  EXPECT_EQ(pzt_actual_position(3.3e-6, a, rng).position, 3.3e-6);
  const auto high = pzt_actual_position(20e-6, a, rng);
  EXPECT_TRUE(high.saturated);
  EXPECT_EQ(high.position, a.pzt_range);
  const auto low = pzt_actual_position(-1e-6, a, rng);
  EXPECT_TRUE(low.saturated);
  EXPECT_EQ(low.position, 0.0);
}

TEST(Detector, Quantization) {
  DetectorSpec d;
  EXPECT_DOUBLE_EQ(d.angular_resolution_urad_per_mV(), 2.0);
  EXPECT_NEAR(detector_read(0.1e-6, d), 0.1, 1e-12);
  EXPECT_NEAR(detector_read(-0.1e-6, d), -0.1, 1e-12);
  EXPECT_EQ(detector_read(0.09e-6, d), 0.0);
  EXPECT_EQ(detector_read(0.0, d), 0.0);
  EXPECT_FALSE(std::signbit(detector_read(-0.01e-6, d)));
  EXPECT_NEAR(detector_read(33.8e-6, d), 16.9, 1e-9);
  d.quantization_mV = 0.0;
  EXPECT_DOUBLE_EQ(detector_read(0.123e-6, d), 0.0615);
}

TEST(Instrument, Validation) {
  InstrumentSpec s;
  EXPECT_NO_THROW(s.validate());
  s.actuator.fb_gap = 0.0;
  EXPECT_THROW(s.validate(), DomainError);
  s = InstrumentSpec{};
  s.detector.quantization_mV = -1;
  EXPECT_THROW(s.validate(), DomainError);
  s = InstrumentSpec{};
  s.balance.moment_of_inertia = 1.0;
  EXPECT_TRUE(s.balance.inertia_warning());
  EXPECT_FALSE(BalanceSpec{}.inertia_warning());
}
