#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "wpr/behavior_prior.hpp"

namespace wpr {
namespace {

const VehicleParams& vehicle(const char* name) {
  static const auto fleet = builtin_fleet();
  return find_vehicle(fleet, name);
}

double max_curvature(const VehicleParams& v) { return std::tan(v.max_steer) / v.wheelbase; }

TEST(Scenario, StraightLineLength) {
  const ScenarioSpec spec{ScenarioKind::kStraight, 6.0, 0.0, 0.0, 100, 10.0};
  const TargetTrajectory t = generate_scenario(spec, vehicle("sporty"));
  ASSERT_EQ(t.size(), 100u);
  EXPECT_NEAR(t.waypoints.back().x, 60.0, 1e-9);
  for (const auto& w : t.waypoints) {
    EXPECT_EQ(w.y, 0.0);
    EXPECT_EQ(w.psi, 0.0);
  }
}

TEST(Scenario, HeldArcHeadingStepIsCurvatureTimesDistance) {
  const auto& v = vehicle("sporty");
  const ScenarioSpec spec{ScenarioKind::kLeftTurn, 8.0, 0.1, 3.0, 150, 10.0};
  const TargetTrajectory t = generate_scenario(spec, v);
  int held = 0;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    const double a = wrap_angle(t.waypoints[i].psi - t.waypoints[i - 1].psi);
    const double b = wrap_angle(t.waypoints[i + 1].psi - t.waypoints[i].psi);
    if (std::abs(a - b) < 1e-12 && a > 0.0 && t.waypoints[i].v == t.waypoints[i - 1].v) {
      EXPECT_NEAR(std::abs(b), 0.1 * t.waypoints[i].v * 0.1, 1e-6);
      ++held;
    }
  }
  EXPECT_GT(held, 5);
  EXPECT_NEAR(t.waypoints.back().psi, std::numbers::pi / 2, 5e-3);
}

TEST(Scenario, BuiltinsFeasibleForEveryVehicle) {
  for (const auto& v : builtin_fleet()) {
    for (const auto& spec : builtin_scenario_specs(v)) {
      const TargetTrajectory t = generate_scenario(spec, v);
      EXPECT_LE(max_path_curvature(t), kScenarioLimitMargin * max_curvature(v) + 1e-9);
      for (std::size_t i = 1; i < t.size(); ++i) {
        EXPECT_GE(t.waypoints[i].v, 0.0);
        EXPECT_LE(t.waypoints[i - 1].v - t.waypoints[i].v, v.max_brake * t.dt());
      }
    }
  }
}

TEST(Scenario, FullStopEndsAtRest) {
  const auto& v = vehicle("heavy_truck");
  const auto specs = builtin_scenario_specs(v);
  const TargetTrajectory t = generate_scenario(specs[3], v);
  EXPECT_EQ(t.waypoints.back().v, 0.0);
  EXPECT_EQ(t.waypoints.back().x, t.waypoints[t.size() - 2].x);
}

TEST(Scenario, InfeasibleSpecsNameTheLimit) {
  const auto& v = vehicle("heavy_truck");
  const auto expect_message = [&](const ScenarioSpec& s, const char* what) {
    try {
      generate_scenario(s, v);
      FAIL() << what;
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find(what), std::string::npos) << e.what();
    }
  };
  expect_message({ScenarioKind::kLeftTurn, 5.0, max_curvature(v), 1.0, 100, 10.0}, "max_steer");
  expect_message({ScenarioKind::kFullStop, 5.0, 0.0, v.max_brake, 100, 10.0}, "max_brake");
  expect_message({ScenarioKind::kStraight, v.max_speed, 0.0, 0.0, 100, 10.0}, "max_speed");
}

TEST(Scenario, SpecJsonRoundTrip) {
  const ScenarioSpec s{ScenarioKind::kSShape, 7.5, 0.05, 2.0, 160, 10.0};
  const ScenarioSpec b = scenario_spec_from_json(scenario_spec_to_json(s));
  EXPECT_EQ(b.kind, s.kind);
  EXPECT_EQ(b.entry_speed, s.entry_speed);
  EXPECT_EQ(b.curvature, s.curvature);
  EXPECT_EQ(b.duration, s.duration);
  EXPECT_THROW(scenario_spec_from_json("{\"kind\": \"loop\"}"), std::invalid_argument);
}

TEST(Probe, StartsOnItsArc) {
  std::mt19937_64 rng(2);
  const auto& v = vehicle("box_truck");
  for (int i = 0; i < 50; ++i) {
    const ProbeScenario p = random_probe(v, 1.3, 90, rng);
    EXPECT_EQ(p.trajectory.size(), 90u);
    EXPECT_LE(std::abs(std::tan(p.start.steer_angle) / v.wheelbase), 0.9 * max_curvature(v) + 1e-12);
    EXPECT_LE(max_path_curvature(p.trajectory), 1.3 * max_curvature(v) + 1e-6);
    EXPECT_NO_THROW(p.trajectory.validate());
  }
}

TEST(BurnIn, CsvRoundTripAndCurvature) {
  const BurnIn b = make_arc_burnin("arc", 1.0 / 18.0, 6.0, 0.0, 10, 10.0);
  EXPECT_EQ(b.steps(), 10u);
  EXPECT_NEAR(b.end_curvature(), 1.0 / 18.0, 1e-9);
  std::stringstream ss;
  write_burnin_csv(ss, b);
  const BurnIn back = parse_burnin_csv(ss);
  ASSERT_EQ(back.records.size(), b.records.size());
  EXPECT_EQ(back.rate_hz, 10.0);
  for (std::size_t i = 0; i < b.records.size(); ++i) {
    EXPECT_EQ(back.records[i].waypoint.x, b.records[i].waypoint.x);
    EXPECT_EQ(back.records[i].v_lon, b.records[i].v_lon);
  }
  EXPECT_EQ(builtin_initial_conditions().size(), 4u);
}

TEST(BurnIn, InitialStateAndInfeasibleCurvature) {
  const BurnIn tight = make_arc_burnin("tight", 1.0 / 5.0, 3.0, 0.0, 10, 10.0);
  EXPECT_THROW(burn_in_initial_state(tight, vehicle("heavy_truck")), std::invalid_argument);
  const BurnIn b = make_arc_burnin("arc", 1.0 / 18.0, 6.0, 0.0, 0, 10.0);
  const VehicleState s = burn_in_initial_state(b, vehicle("sporty"));
  EXPECT_EQ(s.x, 0.0);
  EXPECT_EQ(s.v_lon, 6.0);
}

TEST(Prior, SamplesAreContinuousWithBurnIn) {
  const PriorConfig config;
  std::mt19937_64 rng(3);
  for (const auto& b : builtin_initial_conditions()) {
    const Waypoint& end = b.records.back().waypoint;
    for (int i = 0; i < 250; ++i) {
      const TargetTrajectory t = sample_prior(b, config, rng);
      ASSERT_EQ(t.size(), static_cast<std::size_t>(config.horizon));
      const double first_step = std::hypot(t.waypoints[0].x - end.x, t.waypoints[0].y - end.y);
      EXPECT_LE(first_step, (end.v + 1.0) / config.rate_hz * 1.5);
      EXPECT_LT(std::abs(wrap_angle(t.waypoints[0].psi - end.psi)), 0.1);
      for (std::size_t k = 1; k < t.size(); ++k) {
        const auto& a = t.waypoints[k - 1];
        const auto& c = t.waypoints[k];
        EXPECT_LT(std::hypot(c.x - a.x, c.y - a.y), 2.0);
        EXPECT_LT(std::abs(wrap_angle(c.psi - a.psi)), 0.2);
      }
    }
  }
}

TEST(Prior, CurvatureSpansFeasibleAndInfeasibleRanges) {
  // The prior is vehicle-agnostic: some draws are too tight for the heavy
  // truck and nearly all are within reach of the sporty car.
  const PriorConfig config;
  std::mt19937_64 rng(4);
  const BurnIn b = builtin_initial_conditions()[3];
  const double heavy = max_curvature(vehicle("heavy_truck"));
  const double sporty = max_curvature(vehicle("sporty"));
  int beyond_heavy = 0, beyond_sporty = 0;
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    const double k = max_path_curvature(sample_prior(b, config, rng));
    beyond_heavy += k > heavy;
    beyond_sporty += k > sporty;
  }
  EXPECT_GT(beyond_heavy, n / 10);
  EXPECT_LT(beyond_heavy, n);
  EXPECT_LT(beyond_sporty, n / 20);
}

TEST(Prior, NoiselessSingleModeIsStraight) {
  PriorConfig config;
  config.num_modes = 1;
  config.curvature_noise = 0.0;
  config.speed_noise = 0.0;
  std::mt19937_64 rng(5);
  const TargetTrajectory t = sample_prior(builtin_initial_conditions()[3], config, rng);
  for (std::size_t k = 0; k < t.size(); ++k) {
    EXPECT_NEAR(t.waypoints[k].y, 0.0, 1e-9);
    EXPECT_NEAR(t.waypoints[k].x, 6.0 + 0.6 * static_cast<double>(k + 1), 1e-9);
  }
}

TEST(Prior, SeedReproducibleAndConfigStrict) {
  const PriorConfig config;
  const BurnIn b = builtin_initial_conditions()[0];
  std::mt19937_64 r1(9), r2(9);
  for (int i = 0; i < 5; ++i) {
    const TargetTrajectory a = sample_prior(b, config, r1);
    const TargetTrajectory c = sample_prior(b, config, r2);
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a.waypoints[k].x, c.waypoints[k].x);
      EXPECT_EQ(a.waypoints[k].psi, c.waypoints[k].psi);
    }
  }
  EXPECT_EQ(prior_config_from_json(prior_config_to_json(config)).horizon, config.horizon);
  EXPECT_THROW(prior_config_from_json("{\"horizon\": 1}"), std::invalid_argument);
  EXPECT_THROW(prior_config_from_json("{\"modes\": 3}"), std::invalid_argument);
}

}  // namespace
}  // namespace wpr
