#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "wpr/vehicle.hpp"

namespace wpr {
namespace {

VehicleParams simple_params() {
  VehicleParams p;
  p.name = "simple";
  p.wheelbase = 2.5;
  p.max_steer = 0.5;
  p.max_accel = 3.0;
  p.max_brake = 6.0;
  p.max_speed = 20.0;
  p.steer_rate_limit = 1.0;
  return p;
}

TEST(WrapAngle, MapsIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(std::numbers::pi), std::numbers::pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-std::numbers::pi), std::numbers::pi);
  EXPECT_NEAR(wrap_angle(3.1 - (-3.1)), 6.2 - 2 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(wrap_angle(7.0), 7.0 - 2 * std::numbers::pi, 1e-12);
}

TEST(Step, RestIsFixedPoint) {
  for (const auto& p : builtin_fleet()) {
    VehicleState s;
    s.x = 1.5;
    s.y = -2.0;
    s.yaw = 0.3;
    const VehicleState n = step(s, Action(0.0, 0.0), p, 0.1);
    EXPECT_EQ(n.x, s.x);
    EXPECT_EQ(n.y, s.y);
    EXPECT_EQ(n.yaw, s.yaw);
    EXPECT_EQ(n.v_lon, 0.0);
  }
}

TEST(Step, FullThrottleFromRestUsesNewSpeedForPosition) {
  const VehicleParams p = simple_params();
  const VehicleState n = step(VehicleState{}, Action(0.0, 1.0), p, 0.1);
  EXPECT_NEAR(n.v_lon, 0.3, 1e-15);
  // Semi-implicit order: position integrates with the updated speed.
  EXPECT_NEAR(n.x, 0.3 * 0.1, 1e-15);
  EXPECT_EQ(n.y, 0.0);
}

TEST(Step, FullSteerTracesMinimumRadiusCircle) {
  const VehicleParams p = simple_params();
  const double radius = min_turning_radius(p);
  VehicleState s;
  s.v_lon = 5.0;
  s.steer_angle = p.max_steer;
  const double dt = 0.001;
  const int n = static_cast<int>(std::round(2 * std::numbers::pi * radius / (s.v_lon * dt)));
  for (int i = 0; i < n; ++i) s = step(s, Action(1.0, 0.0), p, dt);
  EXPECT_LT(std::hypot(s.x, s.y), 0.02 * radius);
}

TEST(Step, BrakingStopsAtZero) {
  const VehicleParams p = simple_params();
  VehicleState s;
  s.v_lon = 0.2;
  s = step(s, Action(0.0, -1.0), p, 0.1);
  EXPECT_EQ(s.v_lon, 0.0);
  s = step(s, Action(0.0, -1.0), p, 0.1);
  EXPECT_EQ(s.v_lon, 0.0);
}

TEST(Step, GearScalesAcceleration) {
  VehicleParams p = simple_params();
  p.gear_count = 2;
  p.gear_speed_thresholds = {5.0};
  p.gear_accel_scale = {1.0, 0.5};
  VehicleState s;
  s.v_lon = 6.0;
  const VehicleState n = step(s, Action(0.0, 1.0), p, 0.1);
  EXPECT_NEAR(n.v_lon, 6.0 + 0.5 * 3.0 * 0.1, 1e-12);
  EXPECT_EQ(n.gear, 2);
  EXPECT_EQ(p.gear_for_speed(4.0), 1);
  EXPECT_EQ(p.gear_for_speed(5.0), 1);
  EXPECT_EQ(p.gear_for_speed(5.1), 2);
}

TEST(Step, RejectsBadInputs) {
  const VehicleParams p = simple_params();
  EXPECT_THROW(step(VehicleState{}, Action(0, 0), p, 0.0), std::invalid_argument);
  VehicleState bad;
  bad.x = std::nan("");
  EXPECT_THROW(step(bad, Action(0, 0), p, 0.1), std::invalid_argument);
  EXPECT_THROW(Action(std::nan(""), 0.0), std::invalid_argument);
  const Action clamped(3.0, -2.0);
  EXPECT_EQ(clamped.steer_cmd(), 1.0);
  EXPECT_EQ(clamped.pedal_cmd(), -1.0);
}

TEST(Step, RandomRolloutsRespectBoundsAndRigidMotion) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& p : builtin_fleet()) {
    VehicleState a;
    a.v_lon = 5.0;
    const double theta = 0.7, tx = 3.0, ty = -4.0;
    VehicleState b = a;
    b.x = tx;
    b.y = ty;
    b.yaw = theta;
    for (int i = 0; i < 300; ++i) {
      const Action act(u(rng), u(rng));
      const VehicleState na = step(a, act, p, 0.1);
      const VehicleState nb = step(b, act, p, 0.1);
      EXPECT_GE(na.v_lon, 0.0);
      EXPECT_LE(na.v_lon, p.max_speed);
      EXPECT_LE(std::abs(na.steer_angle - a.steer_angle), p.steer_rate_limit * 0.1 + 1e-12);
      EXPECT_LE(std::abs(std::tan(na.steer_angle)) / p.wheelbase,
                1.0 / min_turning_radius(p) + 1e-12);
      const double rx = std::cos(theta) * na.x - std::sin(theta) * na.y + tx;
      const double ry = std::sin(theta) * na.x + std::cos(theta) * na.y + ty;
      ASSERT_NEAR(nb.x, rx, 1e-9);
      ASSERT_NEAR(nb.y, ry, 1e-9);
      ASSERT_NEAR(wrap_angle(nb.yaw - na.yaw - theta), 0.0, 1e-9);
      const VehicleState again = step(a, act, p, 0.1);
      EXPECT_EQ(again.x, na.x);
      EXPECT_EQ(again.yaw, na.yaw);
      a = na;
      b = nb;
    }
  }
}

TEST(MinTurningRadius, ClosedForms) {
  VehicleParams p = simple_params();
  p.max_steer = std::numbers::pi / 4;
  EXPECT_NEAR(min_turning_radius(p), 2.5, 1e-12);
  p.wheelbase = 4.0;
  p.max_steer = 0.35;
  EXPECT_NEAR(min_turning_radius(p), 4.0 / std::tan(0.35), 1e-12);
  EXPECT_NEAR(min_turning_radius(p), 10.96, 0.01);
  double previous = 1e9;
  for (double steer = 0.1; steer < 1.55; steer += 0.1) {
    p.max_steer = steer;
    EXPECT_LT(min_turning_radius(p), previous);
    previous = min_turning_radius(p);
  }
}

TEST(Fleet, OrderingAndValidity) {
  const auto fleet = builtin_fleet();
  ASSERT_EQ(fleet.size(), 4u);
  for (const auto& p : fleet) EXPECT_NO_THROW(p.validate());
  const auto& sporty = find_vehicle(fleet, "sporty");
  const auto& heavy = find_vehicle(fleet, "heavy_truck");
  EXPECT_GT(sporty.max_accel, heavy.max_accel);
  EXPECT_GT(min_turning_radius(heavy), min_turning_radius(sporty));
  EXPECT_THROW(find_vehicle(fleet, "bicycle"), std::invalid_argument);
}

TEST(Fleet, JsonRoundTripAndStrictness) {
  const auto fleet = builtin_fleet();
  const auto back = parse_fleet_json(fleet_to_json(fleet));
  ASSERT_EQ(back.size(), fleet.size());
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    EXPECT_EQ(back[i].name, fleet[i].name);
    EXPECT_EQ(back[i].wheelbase, fleet[i].wheelbase);
    EXPECT_EQ(back[i].gear_accel_scale, fleet[i].gear_accel_scale);
  }
  EXPECT_THROW(parse_fleet_json("{}"), std::invalid_argument);
  std::string text = fleet_to_json({fleet[0]});
  text.insert(text.find('{') + 1, "\"colour\": \"red\",");
  EXPECT_THROW(parse_fleet_json(text), std::invalid_argument);
}

TEST(VehicleParams, ValidateNamesViolation) {
  VehicleParams p = simple_params();
  p.wheelbase = -1.0;
  try {
    p.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("wheelbase"), std::string::npos);
  }
}

}  // namespace
}  // namespace wpr
