#ifndef WPR_WAYPOINT_ENV_HPP_
#define WPR_WAYPOINT_ENV_HPP_

#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "wpr/vehicle.hpp"

namespace wpr {

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double psi = 0.0;

  Eigen::Vector2d position() const { return {x, y}; }
};

/// Uniformly timed waypoints k_1..k_T. Waypoint i is the target for the
/// vehicle state reached after i + 1 control steps from the start state.
struct TargetTrajectory {
  std::vector<Waypoint> waypoints;
  double rate_hz = 10.0;

  std::size_t size() const { return waypoints.size(); }
  double dt() const { return 1.0 / rate_hz; }

  /// Throws std::invalid_argument on T < 2, bad rate or non-finite fields.
  void validate() const;
};

/// The vehicle state one step before the first waypoint: back-extrapolated
/// along the first waypoint's heading at its speed.
VehicleState start_state(const TargetTrajectory& trajectory, const VehicleParams& params);

struct Observation {
  double v_lon = 0.0;
  double v_lat = 0.0;
  double gear = 1.0;
  Eigen::VectorXd rel_x;
  Eigen::VectorXd rel_y;
  Eigen::VectorXd rel_psi;

  Eigen::Index horizon() const { return rel_x.size(); }

  /// [v_lon, v_lat, gear, rel_x..., rel_y..., rel_psi...], length 3(H+1).
  Eigen::VectorXd flatten() const;
};

inline Eigen::Index observation_size(int horizon) { return 3 * (horizon + 1); }

/// Window of the H waypoints starting at index t, expressed in the vehicle
/// frame. Indices past the end repeat the final waypoint.
Observation observe(const VehicleState& state, const TargetTrajectory& trajectory,
                    std::size_t t, int horizon);

/// epsilon minus the planar distance between vehicle and waypoint.
double reward(const VehicleState& state, const Waypoint& waypoint, double epsilon);

enum class Termination { kNone, kCompleted, kDistanceExceeded, kTimeLimit };

std::string_view to_string(Termination t);

struct EpisodeTrace {
  std::vector<VehicleState> states;  // s_0 .. s_n
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<double> distances;
  Termination terminated_by = Termination::kNone;
  std::size_t num_waypoints = 0;

  double total_reward() const;
};

bool success(const EpisodeTrace& trace, double epsilon);
double hit_fraction(const EpisodeTrace& trace, double epsilon);

struct EnvConfig {
  double epsilon = 1.0;
  int horizon = 30;
  int extra_time_steps = 10;  // time limit is T + extra_time_steps
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  Termination termination = Termination::kNone;
};

/// Time-indexed waypoint following: the target index advances by one every
/// step regardless of the vehicle's progress.
class WaypointEnv {
 public:
  WaypointEnv(VehicleParams params, TargetTrajectory trajectory, EnvConfig config = {});

  Observation reset(const VehicleState& initial_state);
  StepResult step(const Action& action);

  Observation observation() const;
  const VehicleState& state() const { return state_; }
  const EpisodeTrace& trace() const { return trace_; }
  const TargetTrajectory& trajectory() const { return trajectory_; }
  const VehicleParams& params() const { return params_; }
  const EnvConfig& config() const { return config_; }
  bool done() const { return trace_.terminated_by != Termination::kNone; }
  std::size_t time_index() const { return t_; }
  std::size_t time_limit() const;

 private:
  VehicleParams params_;
  TargetTrajectory trajectory_;
  EnvConfig config_;
  VehicleState state_;
  EpisodeTrace trace_;
  std::size_t t_ = 0;
  bool started_ = false;
};

}  // namespace wpr

#endif  // WPR_WAYPOINT_ENV_HPP_
