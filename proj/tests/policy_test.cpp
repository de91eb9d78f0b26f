#include "itg/policy.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

namespace itg {
namespace {

PolicyConditioning conditioning(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PolicyConditioning c;
  c.x0 = Waypoint{-250.0 + 150.0 * u(rng), 30.0 + 40.0 * u(rng)}.state();
  c.behaviors = {Primitive::DriftPlusV, Primitive::StationKeeping, Primitive::RetreatToPlusV};
  c.t_f = 900.0 * (30 + static_cast<int>(rng() % 40));
  c.mean_anomaly = 2.0 * std::numbers::pi * u(rng);
  c.r_koz = 20.0 + 10.0 * static_cast<double>(rng() % 3);
  c.beta = 0.75 + 0.25 * static_cast<double>(rng() % 5);
  return c;
}

PolicyWeights small_net(std::uint64_t seed, std::vector<int> hidden = {8, 8}) {
  std::mt19937_64 rng(seed);
  PolicyArchitecture arch;
  arch.hidden = std::move(hidden);
  return init_policy(arch, rng);
}

TEST(Featurize, DeterministicWithPadding) {
  std::mt19937_64 rng(1);
  PolicyConditioning c = conditioning(rng);
  EXPECT_EQ(raw_features(c), raw_features(c));
  c.behaviors.pop_back();
  const Eigen::VectorXd f = raw_features(c);
  EXPECT_EQ(f.size(), kFeatureDim);
  const int third = 7 + 2 * kBehaviorCategories;
  EXPECT_EQ(f[third + kBehaviorCategories - 1], 1.0);
  EXPECT_EQ(f.segment(third, kBehaviorCategories).sum(), 1.0);
  c.behaviors.assign(4, Primitive::StationKeeping);
  EXPECT_THROW(raw_features(c), std::domain_error);
}

TEST(Featurize, StandardizedTrainingFeatures) {
  std::mt19937_64 rng(2);
  std::vector<PolicyConditioning> cs;
  for (int i = 0; i < 500; ++i) cs.push_back(conditioning(rng));
  Eigen::MatrixXd raw(kFeatureDim, 500);
  for (int i = 0; i < 500; ++i) raw.col(i) = raw_features(cs[i]);
  PolicyWeights w = small_net(0);
  fit_feature_stats(w, raw);
  Eigen::MatrixXd z(kFeatureDim, 500);
  for (int i = 0; i < 500; ++i) z.col(i) = featurize(w, cs[i]);
  for (int d = 0; d < kFeatureDim; ++d) {
    const double mean = z.row(d).mean();
    const double sd = std::sqrt((z.row(d).array() - mean).square().mean());
    EXPECT_NEAR(mean, 0.0, 0.1) << d;
    if (raw.row(d).maxCoeff() > raw.row(d).minCoeff()) EXPECT_NEAR(sd, 1.0, 0.1) << d;
  }
}

TEST(Forward, ZeroNetworkGivesStandardNormal) {
  PolicyWeights w = small_net(0);
  for (auto& l : w.layers) {
    l.w.setZero();
    l.b.setZero();
  }
  const GaussianHead h = forward(w, Eigen::MatrixXd::Random(kFeatureDim, 5));
  EXPECT_EQ(h.mu.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(h.log_sigma.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, BatchOrderAndFiniteness) {
  const PolicyWeights w = small_net(3, {128, 128, 128});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 3.0);
  Eigen::MatrixXd x(kFeatureDim, 10000);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  const GaussianHead h = forward(w, x);
  EXPECT_TRUE(h.mu.allFinite());
  EXPECT_TRUE(h.log_sigma.allFinite());
  EXPECT_LE(h.log_sigma.maxCoeff(), w.log_sigma_max);
  EXPECT_GE(h.log_sigma.minCoeff(), w.log_sigma_min);
  Eigen::MatrixXd rev = x.rowwise().reverse();
  const GaussianHead g = forward(w, rev);
  EXPECT_EQ(g.mu.rowwise().reverse(), h.mu);
  EXPECT_THROW(forward(w, Eigen::MatrixXd::Zero(kFeatureDim + 1, 1)), std::domain_error);
}

TEST(Nll, ClosedFormAtTarget) {
  PolicyWeights w = small_net(0);
  for (auto& l : w.layers) {
    l.w.setZero();
    l.b.setZero();
  }
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(kFeatureDim, 1);
  const NllResult r = nll(w, x, Eigen::MatrixXd::Zero(kOutputDim, 1), Eigen::MatrixXd::Ones(kOutputDim, 1),
                          Eigen::VectorXd::Ones(1));
  EXPECT_NEAR(r.loss, 0.5 * kOutputDim * std::log(2.0 * std::numbers::pi), 1e-12);
}

TEST(Nll, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  for (int net = 0; net < 4; ++net) {
    PolicyWeights w = small_net(100 + net, {6, 5});
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(kFeatureDim, 7);
    const Eigen::MatrixXd y = Eigen::MatrixXd::Random(kOutputDim, 7);
    Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(kOutputDim, 7);
    mask.bottomRows(3).col(2).setZero();
    const Eigen::VectorXd sw = Eigen::VectorXd::Random(7).cwiseAbs();
    const NllResult r = nll(w, x, y, mask, sw);
    for (int slice = 0; slice < 5; ++slice) {
      // random direction over every parameter
      std::vector<DenseLayer> dir;
      double analytic = 0.0;
      for (std::size_t l = 0; l < w.layers.size(); ++l) {
        DenseLayer d{Eigen::MatrixXd(w.layers[l].w.rows(), w.layers[l].w.cols()), Eigen::VectorXd(w.layers[l].b.size())};
        for (Eigen::Index i = 0; i < d.w.size(); ++i) d.w.data()[i] = nd(rng);
        for (Eigen::Index i = 0; i < d.b.size(); ++i) d.b[i] = nd(rng);
        analytic += (d.w.cwiseProduct(r.grad[l].w)).sum() + d.b.dot(r.grad[l].b);
        dir.push_back(std::move(d));
      }
      auto shifted = [&](double h) {
        PolicyWeights v = w;
        for (std::size_t l = 0; l < v.layers.size(); ++l) {
          v.layers[l].w += h * dir[l].w;
          v.layers[l].b += h * dir[l].b;
        }
        return nll(v, x, y, mask, sw).loss;
      };
      const double h = 1e-5;
      const double fd = (shifted(h) - shifted(-h)) / (2.0 * h);
      EXPECT_LT(std::abs(fd - analytic) / std::max(std::abs(fd), 1e-8), 1e-5) << "net " << net << " slice " << slice;
    }
  }
}

TEST(Nll, DecreasesTowardTarget) {
  PolicyWeights w = small_net(0);
  for (auto& l : w.layers) {
    l.w.setZero();
    l.b.setZero();
  }
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(kFeatureDim, 1);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(kOutputDim, 1, 0.8);
  double prev = std::numeric_limits<double>::infinity();
  for (double m = 0.0; m <= 0.8; m += 0.1) {
    w.layers.back().b.head(kOutputDim).setConstant(m);
    const double l = nll(w, x, y, Eigen::MatrixXd::Ones(kOutputDim, 1), Eigen::VectorXd::Ones(1)).loss;
    EXPECT_LT(l, prev);
    prev = l;
  }
}

TEST(ProjectDurations, SumAndFloor) {
  EXPECT_EQ(project_durations({10.0, 10.0, 10.0}, 30), (std::vector<int>{10, 10, 10}));
  EXPECT_EQ(project_durations({-3.0, 20.0}, 10), (std::vector<int>{1, 9}));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(10.0, 20.0);
  for (int t = 0; t < 500; ++t) {
    const int k = 1 + static_cast<int>(rng() % 3);
    std::vector<double> raw(k);
    for (double& r : raw) r = nd(rng);
    const int total = k + static_cast<int>(rng() % 100);
    const auto d = project_durations(raw, total);
    EXPECT_EQ(std::accumulate(d.begin(), d.end(), 0), total);
    for (int x : d) EXPECT_GE(x, 1);
  }
  EXPECT_THROW(project_durations({1.0, 1.0}, 1), std::domain_error);
}

std::vector<TrainingSample> constant_target_set(std::mt19937_64& rng, int n, const WaypointPlan& y) {
  std::vector<TrainingSample> data;
  for (int i = 0; i < n; ++i) data.push_back({conditioning(rng), y, 1.0});
  return data;
}

TEST(Train, ConstantTargetConverges) {
  std::mt19937_64 rng(6);
  const WaypointPlan y{{{120.0, 40.0}, {0.0, 55.0}, {-180.0, 2.0}}, {20, 12, 30}};
  const auto data = constant_target_set(rng, 400, y);
  TrainConfig cfg;
  cfg.arch.hidden = {32, 32};
  cfg.epochs = 150;
  cfg.batch = 64;
  cfg.lr = 1e-2;
  const TrainingResult r = train(data, cfg);
  const Eigen::VectorXd target = encode_plan(y).y;
  const GaussianHead h = forward(r.weights, featurize(r.weights, data[0].x));
  EXPECT_LT((h.mu.col(0) - target).cwiseAbs().maxCoeff(), 0.02 * 2.0);
  EXPECT_LT(r.history.back().validation_nll, r.initial_validation_nll);
}

TEST(Train, RewardWeightingPullsTowardHighRewardMode) {
  const WaypointPlan high{{{150.0, 50.0}, {0.0, 50.0}, {200.0, 0.0}}, {30, 10, 20}};
  const WaypointPlan low{{{-150.0, 10.0}, {0.0, 35.0}, {-200.0, 60.0}}, {10, 30, 10}};
  const Eigen::VectorXd yh = encode_plan(high).y, yl = encode_plan(low).y;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    std::vector<TrainingSample> data;
    for (int i = 0; i < 300; ++i) {
      const bool h = i % 2 == 0;
      data.push_back({conditioning(rng), h ? high : low, (h ? 1.0 : 0.6) + u(rng)});
    }
    TrainConfig cfg;
    cfg.arch.hidden = {16, 16};
    cfg.epochs = 40;
    cfg.batch = 64;
    cfg.lr = 1e-2;
    cfg.seed = seed;
    const TrainingResult weighted = train(data, cfg);
    cfg.reward_weighted = false;
    const TrainingResult plain = train(data, cfg);
    double dw = 0.0, dp = 0.0;
    for (const auto& s : data) {
      dw += (forward(weighted.weights, featurize(weighted.weights, s.x)).mu.col(0) - yh).norm();
      dp += (forward(plain.weights, featurize(plain.weights, s.x)).mu.col(0) - yh).norm();
    }
    EXPECT_LT(dw, dp) << "seed " << seed;
    (void)yl;
  }
}

TEST(Train, DeterministicPerSeed) {
  std::mt19937_64 rng(8);
  const auto data = constant_target_set(rng, 100, {{{10.0, 40.0}}, {20}});
  TrainConfig cfg;
  cfg.arch.hidden = {8};
  cfg.epochs = 3;
  cfg.batch = 16;
  const TrainingResult a = train(data, cfg), b = train(data, cfg);
  for (std::size_t l = 0; l < a.weights.layers.size(); ++l) {
    EXPECT_EQ(a.weights.layers[l].w, b.weights.layers[l].w);
    EXPECT_EQ(a.weights.layers[l].b, b.weights.layers[l].b);
  }
}

TEST(Train, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(train({}, TrainConfig{}), std::domain_error);
  std::mt19937_64 rng(9);
  auto data = constant_target_set(rng, 20, {{{10.0, 40.0}}, {20}});
  data[3].y.waypoints[0].d_lambda = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.arch.hidden = {4};
  cfg.validation_fraction = 0.0;
  EXPECT_THROW(train(data, cfg), std::runtime_error);
}

TEST(Infer, ProjectionAndModes) {
  std::mt19937_64 rng(10);
  PolicyWeights w = small_net(10);
  PolicyConditioning c = conditioning(rng);
  const WaypointPlan a = infer(w, c), b = infer(w, c);
  EXPECT_EQ(a.durations, b.durations);
  EXPECT_EQ(a.waypoints[1].d_lambda, b.waypoints[1].d_lambda);
  EXPECT_EQ(a.total_steps(), static_cast<int>(std::lround(c.t_f / 900.0)));
  c.behaviors.resize(2);
  EXPECT_EQ(infer(w, c).phases(), 2);

  w.log_sigma_min = -30.0;
  w.log_sigma_max = -29.0;
  const WaypointPlan m = infer(w, c), s = infer(w, c, 900.0, InferMode::Sample, 42);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(m.waypoints[k].d_eyiy, s.waypoints[k].d_eyiy, 1e-9);
  EXPECT_EQ(m.durations, s.durations);
}

TEST(Persistence, JsonRoundTrip) {
  PolicyWeights w = small_net(12, {5, 4});
  w.feature_mean.setRandom();
  const std::string text = to_json(w).dump();
  const PolicyWeights r = policy_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(to_json(r).dump(), text);
  for (std::size_t l = 0; l < w.layers.size(); ++l) EXPECT_EQ(r.layers[l].w, w.layers[l].w);
  auto bad = to_json(w);
  bad["schema_version"] = 99;
  EXPECT_THROW(policy_from_json(bad), std::domain_error);
}

}  // namespace
}  // namespace itg
