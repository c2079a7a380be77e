#ifndef WPR_VEHICLE_HPP_
#define WPR_VEHICLE_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace wpr {

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

/// Dynamics constants for one vehicle type.
struct VehicleParams {
  std::string name;
  double wheelbase = 2.5;         // m
  double max_steer = 0.5;         // rad, road-wheel angle
  double max_accel = 3.0;         // m/s^2 at full throttle in first gear
  double max_brake = 6.0;         // m/s^2 at full brake
  double max_speed = 25.0;        // m/s
  double steer_rate_limit = 1.0;  // rad/s
  int gear_count = 1;
  std::vector<double> gear_speed_thresholds;  // ascending, gear_count - 1 entries
  std::vector<double> gear_accel_scale{1.0};  // gear_count entries in (0, 1]

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  int gear_for_speed(double v_lon) const;
  double accel_scale_for_speed(double v_lon) const;
};

struct VehicleState {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  double v_lon = 0.0;
  double v_lat = 0.0;  // always zero for the no-slip bicycle
  double steer_angle = 0.0;
  int gear = 1;

  Eigen::Vector2d position() const { return {x, y}; }
};

/// Normalized controls, both clamped to [-1, 1] on construction.
class Action {
 public:
  Action() = default;
  Action(double steer_cmd, double pedal_cmd);

  double steer_cmd() const { return steer_; }
  double pedal_cmd() const { return pedal_; }

 private:
  double steer_ = 0.0;
  double pedal_ = 0.0;
};

/// Advances the kinematic bicycle by one step of length dt.
///
/// Integration order is semi-implicit: the steering angle is rate-limited
/// toward its target first, then the longitudinal speed is updated, then
/// yaw and position are integrated with the new speed and new yaw.
/// Braking stops at v_lon = 0 and there is no reverse gear.
VehicleState step(const VehicleState& state, const Action& action,
                  const VehicleParams& params, double dt);

/// wheelbase / tan(max_steer).
double min_turning_radius(const VehicleParams& params);

/// Sporty car, off-road SUV, box truck and heavy truck, in decreasing
/// order of controllability.
std::vector<VehicleParams> builtin_fleet();

/// Looks a vehicle up by name in `fleet`; throws if absent.
const VehicleParams& find_vehicle(const std::vector<VehicleParams>& fleet,
                                  std::string_view name);

/// Parses a JSON array of vehicle objects. Unknown or missing fields throw.
std::vector<VehicleParams> parse_fleet_json(const std::string& text);
std::vector<VehicleParams> load_fleet_json(const std::filesystem::path& path);
std::string fleet_to_json(const std::vector<VehicleParams>& fleet);

}  // namespace wpr

#endif  // WPR_VEHICLE_HPP_
