#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "wpr/refiner.hpp"

namespace wpr {
namespace {

TEST(Weights, TwoCandidateExample) {
  const std::vector<double> s{std::log(2.0), 0.0};
  const auto w = importance_weights(s);
  EXPECT_NEAR(w[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(w[1], 1.0 / 3.0, 1e-15);
}

TEST(Weights, ShiftInvariantAndStableForHugeScores) {
  const std::vector<double> s{1000.0, 999.0, 990.0};
  const std::vector<double> t{0.0, -1.0, -10.0};
  const auto a = importance_weights(s);
  const auto b = importance_weights(t);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
  EXPECT_GT(a[0], a[1]);
  EXPECT_GT(a[1], a[2]);
}

TEST(Weights, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(importance_weights(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(importance_weights(std::vector<double>{0.0, NAN}), std::invalid_argument);
  EXPECT_THROW(log_evidence(std::vector<double>{INFINITY}), std::invalid_argument);
}

TEST(Evidence, MeanOfExponentials) {
  const std::vector<double> s{0.0, 0.0, std::log(4.0), std::log(4.0)};
  EXPECT_NEAR(log_evidence(s), std::log(2.5), 1e-15);
  EXPECT_NEAR(log_evidence(std::vector<double>{800.0, 800.0}), 800.0, 1e-12);
}

TEST(Resample, SingleCandidateAlwaysChosen) {
  std::mt19937_64 rng(1);
  const auto idx = resample(std::vector<double>{1.0}, rng, 10);
  for (auto i : idx) EXPECT_EQ(i, 0u);
}

TEST(Resample, FrequenciesFollowWeights) {
  std::mt19937_64 rng(2);
  const std::vector<double> w{0.5, 0.3, 0.2};
  std::vector<int> counts(3, 0);
  for (auto i : resample(w, rng, 20000)) ++counts[i];
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(counts[i] / 20000.0, w[i], 0.015);
}

TEST(Score, RejectsHorizonMismatch) {
  ValueNet net(NetworkShape{5, 4, 4}, 10.0);
  TargetTrajectory t;
  for (int i = 0; i < 10; ++i) t.waypoints.push_back({0.5 * (i + 1), 0.0, 5.0, 0.0});
  VehicleParams car;
  car.name = "car";
  EXPECT_THROW(score_s0(net, car, t, VehicleState{}, 6), std::invalid_argument);
  EXPECT_EQ(score_s0(net, car, t, VehicleState{}, 5), 0.0);
}

TEST(Refine, UsesSamplerAndNormalizesWeights) {
  std::mt19937_64 init(3);
  GaussianPolicy policy(NetworkShape{5, 4, 4}, -1.0);
  ValueNet net(NetworkShape{5, 4, 4}, 10.0);
  policy.randomize(init);
  net.randomize(init);
  VehicleParams car;
  car.name = "car";
  const BurnIn b = make_arc_burnin("still", 0.0, 0.0, 0.0, 0, 10.0);
  int calls = 0;
  const PriorSampler prior = [&](std::mt19937_64& rng) {
    ++calls;
    TargetTrajectory t;
    const double y = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    for (int i = 0; i < 10; ++i) t.waypoints.push_back({0.5 * (i + 1), y, 5.0, 0.0});
    return t;
  };
  std::mt19937_64 rng(4);
  const RefineResult r = refine(prior, policy, net, car, b, 12, 1.0, rng);
  EXPECT_EQ(calls, 12);
  ASSERT_EQ(r.candidates.size(), 12u);
  double total = 0.0;
  for (const auto& c : r.candidates) total += c.weight;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_LT(r.selected, 12u);
  EXPECT_EQ(r.trajectory.waypoints[0].y, r.candidates[r.selected].trajectory.waypoints[0].y);

  std::mt19937_64 rng1(4);
  const RefineResult one = refine(prior, policy, net, car, b, 1, 1.0, rng1);
  EXPECT_EQ(one.selected, 0u);
  EXPECT_EQ(one.candidates[0].weight, 1.0);
  EXPECT_EQ(one.log_evidence, one.candidates[0].s0_value);
  EXPECT_THROW(refine(prior, policy, net, car, b, 0, 1.0, rng1), std::invalid_argument);
}

}  // namespace
}  // namespace wpr
