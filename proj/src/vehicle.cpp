#include "wpr/vehicle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace wpr {

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

bool finite_state(const VehicleState& s) {
  return std::isfinite(s.x) && std::isfinite(s.y) && std::isfinite(s.yaw) &&
         std::isfinite(s.v_lon) && std::isfinite(s.v_lat) &&
         std::isfinite(s.steer_angle);
}

}  // namespace

double wrap_angle(double angle) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double wrapped = std::remainder(angle, kTwoPi);
  if (wrapped <= -std::numbers::pi) wrapped += kTwoPi;
  return wrapped;
}

void VehicleParams::validate() const {
  const std::string who = "vehicle '" + name + "': ";
  require(std::isfinite(wheelbase) && wheelbase > 0.0, who + "wheelbase must be > 0");
  require(std::isfinite(max_steer) && max_steer > 0.0 &&
              max_steer < std::numbers::pi / 2.0,
          who + "max_steer must lie in (0, pi/2)");
  require(std::isfinite(max_accel) && max_accel > 0.0, who + "max_accel must be > 0");
  require(std::isfinite(max_brake) && max_brake > 0.0, who + "max_brake must be > 0");
  require(std::isfinite(max_speed) && max_speed > 0.0, who + "max_speed must be > 0");
  require(std::isfinite(steer_rate_limit) && steer_rate_limit > 0.0,
          who + "steer_rate_limit must be > 0");
  require(gear_count >= 1, who + "gear_count must be >= 1");
  require(gear_speed_thresholds.size() == static_cast<std::size_t>(gear_count - 1),
          who + "gear_speed_thresholds must have gear_count - 1 entries");
  require(gear_accel_scale.size() == static_cast<std::size_t>(gear_count),
          who + "gear_accel_scale must have gear_count entries");
  for (std::size_t i = 0; i < gear_speed_thresholds.size(); ++i) {
    require(std::isfinite(gear_speed_thresholds[i]) && gear_speed_thresholds[i] > 0.0,
            who + "gear_speed_thresholds must be positive");
    if (i > 0) {
      require(gear_speed_thresholds[i] > gear_speed_thresholds[i - 1],
              who + "gear_speed_thresholds must be strictly ascending");
    }
  }
  for (double s : gear_accel_scale) {
    require(std::isfinite(s) && s > 0.0 && s <= 1.0,
            who + "gear_accel_scale entries must lie in (0, 1]");
  }
}

int VehicleParams::gear_for_speed(double v_lon) const {
  const double speed = std::abs(v_lon);
  const auto below = std::count_if(gear_speed_thresholds.begin(), gear_speed_thresholds.end(),
                                   [speed](double t) { return t < speed; });
  return 1 + static_cast<int>(below);
}

double VehicleParams::accel_scale_for_speed(double v_lon) const {
  return gear_accel_scale[static_cast<std::size_t>(gear_for_speed(v_lon) - 1)];
}

Action::Action(double steer_cmd, double pedal_cmd)
    : steer_(std::clamp(steer_cmd, -1.0, 1.0)), pedal_(std::clamp(pedal_cmd, -1.0, 1.0)) {
  if (!std::isfinite(steer_cmd) || !std::isfinite(pedal_cmd)) {
    throw std::invalid_argument("Action: non-finite command");
  }
}

VehicleState step(const VehicleState& state, const Action& action,
                  const VehicleParams& params, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("step: dt must be positive and finite");
  }
  if (!finite_state(state)) {
    throw std::invalid_argument("step: non-finite vehicle state");
  }

  VehicleState next = state;

  const double target_steer = action.steer_cmd() * params.max_steer;
  const double max_delta = params.steer_rate_limit * dt;
  next.steer_angle = state.steer_angle + std::clamp(target_steer - state.steer_angle,
                                                    -max_delta, max_delta);
  next.steer_angle = std::clamp(next.steer_angle, -params.max_steer, params.max_steer);

  const double pedal = action.pedal_cmd();
  if (pedal >= 0.0) {
    const double accel = pedal * params.max_accel * params.accel_scale_for_speed(state.v_lon);
    next.v_lon = state.v_lon + accel * dt;
  } else {
    next.v_lon = std::max(0.0, state.v_lon + pedal * params.max_brake * dt);
  }
  next.v_lon = std::clamp(next.v_lon, 0.0, params.max_speed);
  next.v_lat = 0.0;

  const double yaw_rate = next.v_lon * std::tan(next.steer_angle) / params.wheelbase;
  const double yaw = state.yaw + yaw_rate * dt;
  next.x = state.x + next.v_lon * std::cos(yaw) * dt;
  next.y = state.y + next.v_lon * std::sin(yaw) * dt;
  next.yaw = wrap_angle(yaw);
  next.gear = params.gear_for_speed(next.v_lon);
  return next;
}

double min_turning_radius(const VehicleParams& params) {
  return params.wheelbase / std::tan(params.max_steer);
}

std::vector<VehicleParams> builtin_fleet() {
  std::vector<VehicleParams> fleet;

  VehicleParams sporty;
  sporty.name = "sporty";
  sporty.wheelbase = 2.9;
  sporty.max_steer = 0.60;
  sporty.max_accel = 4.0;
  sporty.max_brake = 8.0;
  sporty.max_speed = 30.0;
  sporty.steer_rate_limit = 1.2;
  sporty.gear_count = 1;
  sporty.gear_speed_thresholds = {};
  sporty.gear_accel_scale = {1.0};
  fleet.push_back(sporty);

  VehicleParams offroad;
  offroad.name = "offroad";
  offroad.wheelbase = 3.0;
  offroad.max_steer = 0.55;
  offroad.max_accel = 3.0;
  offroad.max_brake = 7.0;
  offroad.max_speed = 25.0;
  offroad.steer_rate_limit = 1.0;
  offroad.gear_count = 3;
  offroad.gear_speed_thresholds = {5.0, 10.0};
  offroad.gear_accel_scale = {1.0, 0.8, 0.6};
  fleet.push_back(offroad);

  VehicleParams box;
  box.name = "box_truck";
  box.wheelbase = 3.8;
  box.max_steer = 0.50;
  box.max_accel = 2.0;
  box.max_brake = 5.0;
  box.max_speed = 22.0;
  box.steer_rate_limit = 0.6;
  box.gear_count = 4;
  box.gear_speed_thresholds = {4.0, 8.0, 12.0};
  box.gear_accel_scale = {1.0, 0.8, 0.6, 0.45};
  fleet.push_back(box);

  VehicleParams heavy;
  heavy.name = "heavy_truck";
  heavy.wheelbase = 5.5;
  heavy.max_steer = 0.45;
  heavy.max_accel = 1.2;
  heavy.max_brake = 3.5;
  heavy.max_speed = 18.0;
  heavy.steer_rate_limit = 0.35;
  heavy.gear_count = 5;
  heavy.gear_speed_thresholds = {3.0, 6.0, 9.0, 12.0};
  heavy.gear_accel_scale = {1.0, 0.7, 0.5, 0.35, 0.25};
  fleet.push_back(heavy);

  return fleet;
}

const VehicleParams& find_vehicle(const std::vector<VehicleParams>& fleet,
                                  std::string_view name) {
  for (const auto& v : fleet) {
    if (v.name == name) return v;
  }
  throw std::invalid_argument("unknown vehicle '" + std::string(name) + "'");
}

namespace {

const std::set<std::string>& vehicle_fields() {
  static const std::set<std::string> fields = {
      "name",      "wheelbase",        "max_steer",  "max_accel",
      "max_brake", "max_speed",        "steer_rate_limit",
      "gear_count", "gear_speed_thresholds", "gear_accel_scale"};
  return fields;
}

VehicleParams vehicle_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("vehicle entry must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!vehicle_fields().contains(key)) {
      throw std::invalid_argument("unknown vehicle field '" + key + "'");
    }
  }
  for (const auto& key : vehicle_fields()) {
    if (!j.contains(key)) throw std::invalid_argument("missing vehicle field '" + key + "'");
  }
  VehicleParams p;
  p.name = j.at("name").get<std::string>();
  p.wheelbase = j.at("wheelbase").get<double>();
  p.max_steer = j.at("max_steer").get<double>();
  p.max_accel = j.at("max_accel").get<double>();
  p.max_brake = j.at("max_brake").get<double>();
  p.max_speed = j.at("max_speed").get<double>();
  p.steer_rate_limit = j.at("steer_rate_limit").get<double>();
  p.gear_count = j.at("gear_count").get<int>();
  p.gear_speed_thresholds = j.at("gear_speed_thresholds").get<std::vector<double>>();
  p.gear_accel_scale = j.at("gear_accel_scale").get<std::vector<double>>();
  p.validate();
  return p;
}

}  // namespace

std::vector<VehicleParams> parse_fleet_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  if (!doc.is_array()) throw std::invalid_argument("fleet JSON must be an array of vehicles");
  std::vector<VehicleParams> fleet;
  for (const auto& entry : doc) fleet.push_back(vehicle_from_json(entry));
  return fleet;
}

std::vector<VehicleParams> load_fleet_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open fleet file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_fleet_json(buffer.str());
}

std::string fleet_to_json(const std::vector<VehicleParams>& fleet) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& p : fleet) {
    doc.push_back({{"name", p.name},
                   {"wheelbase", p.wheelbase},
                   {"max_steer", p.max_steer},
                   {"max_accel", p.max_accel},
                   {"max_brake", p.max_brake},
                   {"max_speed", p.max_speed},
                   {"steer_rate_limit", p.steer_rate_limit},
                   {"gear_count", p.gear_count},
                   {"gear_speed_thresholds", p.gear_speed_thresholds},
                   {"gear_accel_scale", p.gear_accel_scale}});
  }
  return doc.dump(2);
}

}  // namespace wpr
