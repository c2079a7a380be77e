#include "wpr/waypoint_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace wpr {

void TargetTrajectory::validate() const {
  if (waypoints.size() < 2) {
    throw std::invalid_argument("trajectory needs at least 2 waypoints");
  }
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw std::invalid_argument("trajectory rate_hz must be positive");
  }
  for (const auto& w : waypoints) {
    if (!std::isfinite(w.x) || !std::isfinite(w.y) || !std::isfinite(w.v) ||
        !std::isfinite(w.psi)) {
      throw std::invalid_argument("trajectory has a non-finite waypoint");
    }
  }
}

VehicleState start_state(const TargetTrajectory& trajectory, const VehicleParams& params) {
  trajectory.validate();
  const Waypoint& first = trajectory.waypoints.front();
  VehicleState s;
  s.yaw = wrap_angle(first.psi);
  s.v_lon = std::clamp(first.v, 0.0, params.max_speed);
  s.x = first.x - s.v_lon * std::cos(s.yaw) * trajectory.dt();
  s.y = first.y - s.v_lon * std::sin(s.yaw) * trajectory.dt();
  s.gear = params.gear_for_speed(s.v_lon);
  return s;
}

Eigen::VectorXd Observation::flatten() const {
  const Eigen::Index h = horizon();
  Eigen::VectorXd out(3 * (h + 1));
  out << v_lon, v_lat, gear, rel_x, rel_y, rel_psi;
  return out;
}

Observation observe(const VehicleState& state, const TargetTrajectory& trajectory,
                    std::size_t t, int horizon) {
  if (horizon < 1) throw std::invalid_argument("observe: horizon must be >= 1");
  if (t >= trajectory.size()) {
    throw std::out_of_range("observe: time index " + std::to_string(t) +
                            " outside trajectory of length " +
                            std::to_string(trajectory.size()));
  }
  Observation obs;
  obs.v_lon = state.v_lon;
  obs.v_lat = state.v_lat;
  obs.gear = static_cast<double>(state.gear);
  obs.rel_x.resize(horizon);
  obs.rel_y.resize(horizon);
  obs.rel_psi.resize(horizon);

  // Row vector times the yaw rotation, i.e. R(yaw)^T applied to the offset.
  const double c = std::cos(state.yaw);
  const double s = std::sin(state.yaw);
  const std::size_t last = trajectory.size() - 1;
  for (int j = 0; j < horizon; ++j) {
    const Waypoint& w = trajectory.waypoints[std::min(t + static_cast<std::size_t>(j), last)];
    const double dx = w.x - state.x;
    const double dy = w.y - state.y;
    obs.rel_x[j] = c * dx + s * dy;
    obs.rel_y[j] = -s * dx + c * dy;
    obs.rel_psi[j] = wrap_angle(w.psi - state.yaw);
  }
  return obs;
}

double reward(const VehicleState& state, const Waypoint& waypoint, double epsilon) {
  return epsilon - std::hypot(state.x - waypoint.x, state.y - waypoint.y);
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kNone:
      return "none";
    case Termination::kCompleted:
      return "completed";
    case Termination::kDistanceExceeded:
      return "distance_exceeded";
    case Termination::kTimeLimit:
      return "time_limit";
  }
  return "none";
}

double EpisodeTrace::total_reward() const {
  double sum = 0.0;
  for (double r : rewards) sum += r;
  return sum;
}

bool success(const EpisodeTrace& trace, double epsilon) {
  if (trace.num_waypoints == 0 || trace.distances.size() != trace.num_waypoints) return false;
  return std::all_of(trace.distances.begin(), trace.distances.end(),
                     [epsilon](double d) { return d <= epsilon; });
}

double hit_fraction(const EpisodeTrace& trace, double epsilon) {
  if (trace.num_waypoints == 0) return 0.0;
  const auto hits = std::count_if(trace.distances.begin(), trace.distances.end(),
                                  [epsilon](double d) { return d <= epsilon; });
  return static_cast<double>(hits) / static_cast<double>(trace.num_waypoints);
}

WaypointEnv::WaypointEnv(VehicleParams params, TargetTrajectory trajectory, EnvConfig config)
    : params_(std::move(params)), trajectory_(std::move(trajectory)), config_(config) {
  params_.validate();
  trajectory_.validate();
  if (!(config_.epsilon > 0.0)) throw std::invalid_argument("env: epsilon must be > 0");
  if (config_.horizon < 1) throw std::invalid_argument("env: horizon must be >= 1");
}

std::size_t WaypointEnv::time_limit() const {
  const long limit = static_cast<long>(trajectory_.size()) + config_.extra_time_steps;
  return static_cast<std::size_t>(std::max(1L, limit));
}

Observation WaypointEnv::reset(const VehicleState& initial_state) {
  state_ = initial_state;
  t_ = 0;
  started_ = true;
  trace_ = EpisodeTrace{};
  trace_.num_waypoints = trajectory_.size();
  trace_.states.push_back(state_);
  return observation();
}

Observation WaypointEnv::observation() const {
  return observe(state_, trajectory_, std::min(t_, trajectory_.size() - 1), config_.horizon);
}

StepResult WaypointEnv::step(const Action& action) {
  if (!started_) throw std::logic_error("env: step before reset");
  if (done()) throw std::logic_error("env: step on a terminated episode");

  state_ = wpr::step(state_, action, params_, trajectory_.dt());
  const Waypoint& target = trajectory_.waypoints[t_];
  const double d = std::hypot(state_.x - target.x, state_.y - target.y);
  const double r = config_.epsilon - d;
  ++t_;

  trace_.states.push_back(state_);
  trace_.actions.push_back(action);
  trace_.rewards.push_back(r);
  trace_.distances.push_back(d);

  if (d > config_.epsilon) {
    trace_.terminated_by = Termination::kDistanceExceeded;
  } else if (t_ == trajectory_.size()) {
    trace_.terminated_by = Termination::kCompleted;
  } else if (t_ >= time_limit()) {
    trace_.terminated_by = Termination::kTimeLimit;
  }

  StepResult result;
  result.observation = observation();
  result.reward = r;
  result.termination = trace_.terminated_by;
  result.done = done();
  return result;
}

}  // namespace wpr
