#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "magnet/schedules.hpp"

using namespace magnet;

TEST(Gamma, FirstStepMasksEverything) {
  for (int s : {1, 2, 10, 20}) EXPECT_EQ(gamma(1, s), 1.0);
}

TEST(Gamma, StrictlyDecreasingAndPositive) {
  for (int s : {2, 3, 10, 20, 100}) {
    for (int i = 2; i <= s; ++i) {
      EXPECT_LT(gamma(i, s), gamma(i - 1, s));
      EXPECT_GT(gamma(i, s), 0.0);
    }
  }
}

TEST(Gamma, MatchesZeroBasedLoopConvention) {
  // A loop over i = 0..s-1 with cos(pi i / 2s) visits the same rates.
  const int s = 20;
  for (int i = 0; i < s; ++i) {
    EXPECT_DOUBLE_EQ(gamma(i + 1, s), std::cos(std::numbers::pi * i / (2.0 * s)));
  }
  EXPECT_NEAR(gamma(11, 20), std::cos(std::numbers::pi / 4.0), 1e-15);
}

TEST(Gamma, RejectsOutOfRangeSteps) {
  EXPECT_THROW(gamma(0, 5), std::invalid_argument);
  EXPECT_THROW(gamma(6, 5), std::invalid_argument);
  EXPECT_THROW(gamma(1, 0), std::invalid_argument);
}

TEST(CfgCoeff, Endpoints) {
  const ScheduleParams p;
  EXPECT_EQ(cfg_coeff(1.0, p.lambda0, p.lambda1), 10.0);
  EXPECT_EQ(cfg_coeff(0.0, p.lambda0, p.lambda1), 1.0);
  EXPECT_DOUBLE_EQ(cfg_coeff(0.5, 10.0, 1.0), 5.5);
}

TEST(Temperature, LinearAnnealWithFloor) {
  EXPECT_DOUBLE_EQ(temperature(1, 10, 3.0), 3.0);
  EXPECT_DOUBLE_EQ(temperature(10, 10, 3.0), 0.3);
  EXPECT_DOUBLE_EQ(temperature(1, 1, 0.0), kMinTemperature);
  for (int i = 2; i <= 10; ++i) EXPECT_LT(temperature(i, 10, 3.0), temperature(i - 1, 10, 3.0));
}

TEST(ScheduleParams, Validation) {
  ScheduleParams p;
  EXPECT_NO_THROW(p.validate());
  p.top_p = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.total_steps = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.tau0 = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}
