#include "itg/reward.hpp"

#include <gtest/gtest.h>

#include <random>

namespace itg {
namespace {

TEST(ControlCost, SumsNorms) {
  EXPECT_NEAR(control_cost({Impulse(0.0, 0.1, 0.0), Impulse(0.12, 0.0, 0.16)}), 0.3, 1e-15);
  EXPECT_EQ(control_cost(std::vector<Impulse>(5)), 0.0);
}

TEST(ObservationReward, EmptyShellUsesConvention) {
  EXPECT_EQ(observation_reward({200.0, 150.0, 300.0}, 2, 80.0), 0.0);
  EXPECT_EQ(observation_reward({200.0, 150.0, 300.0}, 2, 80.0, -30.0), -30.0);
}

TEST(ObservationReward, SingleEpoch) {
  std::vector<double> rho(101, 500.0);
  rho[40] = 50.0;
  EXPECT_NEAR(observation_reward(rho, 100, 80.0), -0.5, 1e-15);
}

TEST(ObservationReward, SpansFirstToLastEntry) {
  // epochs 1 and 4 inside; 2 and 3 outside still count
  EXPECT_NEAR(observation_reward({300.0, 60.0, 90.0, 100.0, 70.0, 300.0}, 5, 80.0), -(60.0 + 90 + 100 + 70) / 5,
              1e-12);
}

TEST(ObservationReward, MonotoneInRange) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(40.0, 75.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> rho(20);
    for (double& r : rho) r = u(rng);
    std::vector<double> closer = rho;
    for (double& r : closer) r *= 0.9;
    EXPECT_GT(observation_reward(closer, 19, 80.0), observation_reward(rho, 19, 80.0));
  }
}

TEST(CompositeReward, Arithmetic) {
  EXPECT_EQ(composite_reward(1.0, -2.0, 1.0), -3.0);
  EXPECT_EQ(composite_reward(5.0, -2.0, 0.0), -2.0);
  EXPECT_GT(composite_reward(0.5, -2.0, 10.0), composite_reward(0.6, -2.0, 10.0));
  EXPECT_THROW(composite_reward(1.0, 0.0, -1.0), std::domain_error);
  // affine in R_c with slope -lambda
  EXPECT_NEAR(composite_reward(2.0, -1.0, 3.0) - composite_reward(1.0, -1.0, 3.0), -3.0, 1e-15);
}

Trajectory parked(const RoeState& x, int n, double dt) {
  Trajectory t;
  const OrbitalElements oe = reference_chief(0.0);
  for (int j = 0; j <= n; ++j) {
    t.epochs.push_back(j * dt);
    t.states.push_back(j == 0 ? x : propagate(t.states.back(), Impulse(), oe, (j - 1) * dt, j * dt));
  }
  t.impulses.assign(n, Impulse());
  return t;
}

TEST(MetricVector, FromTrajectory) {
  const OrbitalElements oe = reference_chief(0.0);
  const Trajectory t = parked(RoeState(0.0, 45.0, 0.0, 0.0, 0.0, 0.0), 40, 900.0);
  const MetricVector m = metric_vector(t, KeepOutZone::sphere(30.0), oe, 900.0);
  EXPECT_EQ(m.transfer_time_sec, 36000.0);
  EXPECT_EQ(m.fuel_dv, 0.0);
  EXPECT_NEAR(m.safety_margin_m, 15.0, 1e-6);
  // every epoch at 45 m lies inside the 80 m shell
  EXPECT_NEAR(m.observation_score, -45.0 * 41 / 40, 1e-6);
}

TEST(MetricVector, ObservationIgnoresZeroImpulses) {
  const OrbitalElements oe = reference_chief(0.0);
  Trajectory t = parked(RoeState(0.0, 60.0, 0.0, 10.0, 0.0, 10.0), 10, 900.0);
  const double r0 = observation_reward(t, KeepOutZone::sphere(30.0), oe);
  t.impulses.assign(10, Impulse(0.0, 0.0, 0.0));
  EXPECT_EQ(observation_reward(t, KeepOutZone::sphere(30.0), oe), r0);
}

TEST(BatchWeights, Examples) {
  const auto w = batch_weights({0.0, 1.0, 3.0});
  EXPECT_NEAR(w[0], 0.0, 1e-15);
  EXPECT_NEAR(w[1], 0.25, 1e-15);
  EXPECT_NEAR(w[2], 0.75, 1e-15);
  for (double x : batch_weights({2.0, 2.0, 2.0})) EXPECT_NEAR(x, 1.0 / 3, 1e-15);
  EXPECT_THROW(batch_weights({}), std::domain_error);
}

TEST(BatchWeights, UnitSumAndTranslationInvariance) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.0, 5.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> r(1 + rng() % 50), s;
    for (double& x : r) x = nd(rng);
    const double c = nd(rng);
    for (double x : r) s.push_back(x + c);
    const auto w = batch_weights(r), v = batch_weights(s);
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      EXPECT_GE(w[i], 0.0);
      EXPECT_NEAR(w[i], v[i], 1e-9);
      sum += w[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Intent, ParseAndValidate) {
  const IntentPriority p = IntentPriority::parse("fuel, time,observation,safety_margin");
  EXPECT_EQ(p[0], Metric::Fuel);
  EXPECT_EQ(p[3], Metric::SafetyMargin);
  EXPECT_EQ(IntentPriority::parse(p.str()), p);
  EXPECT_EQ(IntentPriority::parse("safety_margin_m,observation_score,fuel_dv,transfer_time_sec")[1],
            Metric::Observation);
  EXPECT_THROW(IntentPriority::parse("fuel,fuel,time,observation"), std::domain_error);
  EXPECT_THROW(IntentPriority::parse("fuel,time,observation"), std::domain_error);
  EXPECT_THROW(IntentPriority::parse("fuel,time,observation,safety_margin,fuel"), std::domain_error);
  EXPECT_THROW(IntentPriority::parse("fuel,time,warp,safety_margin"), std::domain_error);
}

}  // namespace
}  // namespace itg
