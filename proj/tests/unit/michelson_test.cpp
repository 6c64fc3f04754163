#include <gtest/gtest.h>

#include <cmath>

#include "torsionlab/calibration.hpp"
#include "torsionlab/errors.hpp"

using namespace torsionlab;

TEST(Michelson, FringeDisplacementIsHalfWavelength) {
  EXPECT_DOUBLE_EQ(fringe_displacement(632.8e-9), 316.4e-9);
  EXPECT_NEAR(gain_from_fringe_period(3.164), 100e-9, 1e-20);
}

TEST(Michelson, SixFringeRecovery) {
  MichelsonSynthesis s;
  const auto fit = michelson_calibrate(synthesize_michelson_trace(s));
  EXPECT_NEAR(fit.gain / 100e-9, 1.0, 1e-3);
  EXPECT_NEAR(fit.visibility, 0.95, 1e-3);
  EXPECT_NEAR(fit.fringes, 6.0, 0.01);
  EXPECT_FALSE(fit.low_contrast);
}

TEST(Michelson, NoisyRecoveryAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    MichelsonSynthesis s;
    s.noise = 0.02;
    s.seed = seed;
    s.phase = 0.37 * static_cast<double>(seed);
    const auto fit = michelson_calibrate(synthesize_michelson_trace(s));
    EXPECT_NEAR(fit.gain / 100e-9, 1.0, 1e-3) << seed;
    EXPECT_NEAR(fit.visibility, 0.95, 0.01) << seed;
  }
}

TEST(Michelson, VisibilityRecovered) {
  MichelsonSynthesis s;
  s.visibility = 0.92;
  s.noise = 0.01;
  const auto fit = michelson_calibrate(synthesize_michelson_trace(s));
  EXPECT_NEAR(fit.visibility, 0.92, 0.01);
}

TEST(Michelson, NegativeGainReportedPositive) {
  // Mirroring the voltage axis is the same trace seen with negative gain.
  auto trace = synthesize_michelson_trace(MichelsonSynthesis{});
  for (auto& v : trace.voltage) v = -v;
  const auto fit = michelson_calibrate(trace);
  EXPECT_GT(fit.gain, 0.0);
  EXPECT_NEAR(fit.gain / 100e-9, 1.0, 1e-3);
}

TEST(Michelson, LowContrastFlagged) {
  MichelsonSynthesis s;
  s.visibility = 0.05;
  const auto fit = michelson_calibrate(synthesize_michelson_trace(s));
  EXPECT_TRUE(fit.low_contrast);
}

TEST(Michelson, InsufficientData) {
  MichelsonTrace flat;
  for (int i = 0; i < 100; ++i) {
    flat.voltage.push_back(i * 0.1);
    flat.intensity.push_back(1.0);
  }
  try {
    michelson_calibrate(flat);
    FAIL();
  } catch (const FitError& e) {
    EXPECT_EQ(e.kind(), FitError::Kind::kInsufficientData);
  }

  MichelsonSynthesis s;
  s.fringes = 1.2;
  EXPECT_THROW(michelson_calibrate(synthesize_michelson_trace(s)), FitError);

  MichelsonTrace tiny;
  tiny.voltage = {0, 1, 2};
  tiny.intensity = {0, 1, 0};
  EXPECT_THROW(michelson_calibrate(tiny), FitError);
}
