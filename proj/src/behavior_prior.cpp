#include "wpr/behavior_prior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "wpr/csv_io.hpp"

namespace wpr {

namespace {

constexpr int kScenarioSubsteps = 20;
constexpr int kPriorSubsteps = 10;

struct PathState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // unwrapped
  double v = 0.0;
  double kappa = 0.0;

  /// Exact constant-curvature advance over time h at the current speed.
  void advance(double h) {
    const double ds = v * h;
    const double dpsi = kappa * ds;
    if (std::abs(dpsi) < 1e-12) {
      x += ds * std::cos(heading);
      y += ds * std::sin(heading);
    } else {
      x += (std::sin(heading + dpsi) - std::sin(heading)) / kappa;
      y += (std::cos(heading) - std::cos(heading + dpsi)) / kappa;
    }
    heading += dpsi;
  }

  Waypoint waypoint() const { return {x, y, v, wrap_angle(heading)}; }
};

double move_toward(double value, double target, double max_delta) {
  if (value < target) return std::min(target, value + max_delta);
  return std::max(target, value - max_delta);
}

double max_curvature(const VehicleParams& v) { return std::tan(v.max_steer) / v.wheelbase; }

double sign(double x) { return x < 0.0 ? -1.0 : 1.0; }

std::string fmt(double x) { return format_number(x); }

}  // namespace

// ---------------------------------------------------------------------------
// Scenarios

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kStraight: return "straight";
    case ScenarioKind::kLeftTurn: return "left_turn";
    case ScenarioKind::kRightTurn: return "right_turn";
    case ScenarioKind::kFullStop: return "full_stop";
    case ScenarioKind::kSShape: return "s_shape";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(std::string_view name) {
  for (auto k : {ScenarioKind::kStraight, ScenarioKind::kLeftTurn, ScenarioKind::kRightTurn,
                 ScenarioKind::kFullStop, ScenarioKind::kSShape}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown scenario kind '" + std::string(name) + "'");
}

std::string scenario_spec_to_json(const ScenarioSpec& spec) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(spec.kind));
  j["entry_speed"] = spec.entry_speed;
  j["curvature"] = spec.curvature;
  j["decel"] = spec.decel;
  j["duration"] = spec.duration;
  j["rate_hz"] = spec.rate_hz;
  return j.dump(2);
}

ScenarioSpec scenario_spec_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("scenario spec must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "kind" && key != "entry_speed" && key != "curvature" && key != "decel" &&
        key != "duration" && key != "rate_hz") {
      throw std::invalid_argument("unknown scenario spec field '" + key + "'");
    }
  }
  ScenarioSpec spec;
  spec.kind = scenario_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("entry_speed")) j.at("entry_speed").get_to(spec.entry_speed);
  if (j.contains("curvature")) j.at("curvature").get_to(spec.curvature);
  if (j.contains("decel")) j.at("decel").get_to(spec.decel);
  if (j.contains("duration")) j.at("duration").get_to(spec.duration);
  if (j.contains("rate_hz")) j.at("rate_hz").get_to(spec.rate_hz);
  return spec;
}

namespace {

void check_scenario(const ScenarioSpec& spec, const VehicleParams& vehicle) {
  const double m = kScenarioLimitMargin;
  if (!(spec.rate_hz > 0.0) || !std::isfinite(spec.rate_hz)) {
    throw std::invalid_argument("scenario: rate_hz must be positive");
  }
  if (spec.duration < 2) throw std::invalid_argument("scenario: duration must be >= 2");
  if (!(spec.entry_speed > 0.0)) throw std::invalid_argument("scenario: entry_speed must be > 0");
  if (spec.entry_speed > m * vehicle.max_speed) {
    throw std::invalid_argument("scenario: entry_speed " + fmt(spec.entry_speed) +
                                " exceeds 90% of max_speed " + fmt(vehicle.max_speed));
  }
  const bool turns = spec.kind == ScenarioKind::kLeftTurn ||
                     spec.kind == ScenarioKind::kRightTurn || spec.kind == ScenarioKind::kSShape;
  if (turns) {
    if (!(spec.curvature > 0.0)) throw std::invalid_argument("scenario: curvature must be > 0");
    if (spec.curvature > m * max_curvature(vehicle)) {
      throw std::invalid_argument("scenario: curvature " + fmt(spec.curvature) +
                                  " exceeds 90% of the max_steer curvature limit " +
                                  fmt(max_curvature(vehicle)));
    }
  }
  if (turns || spec.kind == ScenarioKind::kFullStop) {
    if (!(spec.decel > 0.0)) throw std::invalid_argument("scenario: decel must be > 0");
    if (spec.decel > m * vehicle.max_brake) {
      throw std::invalid_argument("scenario: decel " + fmt(spec.decel) +
                                  " exceeds 90% of max_brake " + fmt(vehicle.max_brake));
    }
  }
}

}  // namespace

TargetTrajectory generate_scenario(const ScenarioSpec& spec, const VehicleParams& vehicle) {
  vehicle.validate();
  check_scenario(spec, vehicle);

  const double dt = 1.0 / spec.rate_hz;
  const double h = dt / kScenarioSubsteps;
  const double ramp_rate = 0.5 * vehicle.steer_rate_limit / vehicle.wheelbase;
  const double turn_speed = 0.75 * spec.entry_speed;
  const double lead_time = spec.kind == ScenarioKind::kFullStop ? 3.0 : 1.0;

  // Curvature segments: hold kappas[i] until the heading reaches goals[i].
  std::vector<double> kappas;
  std::vector<double> goals;
  const double k = spec.curvature;
  switch (spec.kind) {
    case ScenarioKind::kLeftTurn:
      kappas = {k};
      goals = {std::numbers::pi / 2};
      break;
    case ScenarioKind::kRightTurn:
      kappas = {-k};
      goals = {-std::numbers::pi / 2};
      break;
    case ScenarioKind::kSShape:
      kappas = {k, -k};
      goals = {std::numbers::pi / 3, 0.0};
      break;
    default:
      break;
  }

  PathState s;
  s.v = spec.entry_speed;
  int segment = -1;  // -1 before the first arc, kappas.size() once all arcs are done
  const int num_segments = static_cast<int>(kappas.size());
  bool stopping = false;

  TargetTrajectory out;
  out.rate_hz = spec.rate_hz;
  out.waypoints.reserve(static_cast<std::size_t>(spec.duration));
  for (int step = 0; step < spec.duration; ++step) {
    for (int sub = 0; sub < kScenarioSubsteps; ++sub) {
      const double t = (step * kScenarioSubsteps + sub) * h;

      // Speed schedule.
      double v_target = spec.entry_speed;
      if (spec.kind == ScenarioKind::kFullStop) {
        if (t >= lead_time) stopping = true;
        if (stopping) v_target = 0.0;
      } else if (num_segments > 0 && t >= lead_time &&
                 (segment < num_segments || s.kappa != 0.0)) {
        v_target = turn_speed;
      }
      if (s.v > v_target) {
        s.v = std::max(v_target, s.v - spec.decel * h);
      } else if (s.v < v_target) {
        const double a = 0.5 * vehicle.max_accel * vehicle.accel_scale_for_speed(s.v);
        s.v = std::min(v_target, s.v + a * h);
      }

      // Curvature schedule.
      if (segment < 0 && num_segments > 0 && t >= lead_time && s.v == turn_speed) segment = 0;
      if (segment >= 0 && segment < num_segments) {
        const double next = segment + 1 < num_segments ? kappas[segment + 1] : 0.0;
        const double hold = kappas[segment];
        const double ramp_heading =
            s.v * 0.5 * (s.kappa + next) * std::abs(next - s.kappa) / ramp_rate;
        if (sign(hold) * (s.heading + ramp_heading - goals[segment]) >= 0.0) ++segment;
      }
      double kappa_target = 0.0;
      if (segment >= 0 && segment < num_segments) kappa_target = kappas[segment];
      s.kappa = move_toward(s.kappa, kappa_target, ramp_rate * h);
      s.advance(h);
    }
    out.waypoints.push_back(s.waypoint());
  }
  out.validate();
  return out;
}

std::vector<ScenarioSpec> builtin_scenario_specs(const VehicleParams& vehicle) {
  const double entry = std::min(8.0, 0.4 * vehicle.max_speed);
  const double kmax = max_curvature(vehicle);
  const double decel = 0.3 * vehicle.max_brake;
  std::vector<ScenarioSpec> specs;
  specs.push_back({ScenarioKind::kStraight, entry, 0.0, 0.0, 120, 10.0});
  specs.push_back({ScenarioKind::kLeftTurn, entry, 0.7 * kmax, decel, 150, 10.0});
  specs.push_back({ScenarioKind::kRightTurn, entry, 0.7 * kmax, decel, 150, 10.0});
  specs.push_back({ScenarioKind::kFullStop, entry, 0.0, 0.4 * vehicle.max_brake, 120, 10.0});
  specs.push_back({ScenarioKind::kSShape, entry, 0.6 * kmax, decel, 160, 10.0});
  return specs;
}

ProbeScenario random_probe(const VehicleParams& vehicle, double max_curvature_factor,
                           int duration, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double kmax = max_curvature(vehicle);
  const double rate = 10.0;
  const double h = 1.0 / (rate * kScenarioSubsteps);

  PathState s;
  s.v = (0.5 + 0.5 * unit(rng)) * std::min(8.0, 0.4 * vehicle.max_speed);
  s.kappa = unit(rng) < 1.0 / 3.0 ? 0.0 : 0.9 * kmax * (2.0 * unit(rng) - 1.0);
  const double kappa_final = max_curvature_factor * kmax * (2.0 * unit(rng) - 1.0);
  const double hold_time = 0.5 + 1.5 * unit(rng);
  const double ramp_rate = (0.25 + 0.75 * unit(rng)) * vehicle.steer_rate_limit / vehicle.wheelbase;
  // Half of the probes also slow down, a third of those to a standstill.
  double v_final = s.v;
  const double u_speed = unit(rng);
  if (u_speed < 1.0 / 6.0) {
    v_final = 0.0;
  } else if (u_speed < 0.5) {
    v_final = s.v * unit(rng);
  }
  const double decel = (0.2 + 0.6 * unit(rng)) * vehicle.max_brake;

  ProbeScenario out;
  out.start.v_lon = s.v;
  out.start.steer_angle = std::atan(vehicle.wheelbase * s.kappa);
  out.start.gear = vehicle.gear_for_speed(s.v);
  out.trajectory.rate_hz = rate;

  bool turn_done = false;
  double turn_start_heading = 0.0;
  bool turning = false;
  for (int step = 0; step < duration; ++step) {
    for (int sub = 0; sub < kScenarioSubsteps; ++sub) {
      const double t = (step * kScenarioSubsteps + sub) * h;
      double target = s.kappa;
      if (t >= hold_time) {
        if (!turning) {
          turning = true;
          turn_start_heading = s.heading;
        }
        if (!turn_done && sign(kappa_final) * (s.heading - turn_start_heading) >=
                              std::numbers::pi / 2) {
          turn_done = true;
        }
        target = turn_done ? 0.0 : kappa_final;
        s.v = std::max(v_final, s.v - decel * h);
      }
      s.kappa = move_toward(s.kappa, target, ramp_rate * h);
      s.advance(h);
    }
    out.trajectory.waypoints.push_back(s.waypoint());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Burn-in

void BurnIn::validate() const {
  if (records.empty()) throw std::invalid_argument("burn-in has no records");
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw std::invalid_argument("burn-in rate_hz must be positive");
  }
  for (const auto& r : records) {
    const auto& w = r.waypoint;
    if (!std::isfinite(r.v_lon) || !std::isfinite(r.v_lat) || !std::isfinite(w.x) ||
        !std::isfinite(w.y) || !std::isfinite(w.v) || !std::isfinite(w.psi)) {
      throw std::invalid_argument("burn-in record has non-finite fields");
    }
    if (r.v_lon < 0.0) throw std::invalid_argument("burn-in speed must be >= 0");
  }
}

namespace {

double segment_curvature(const Waypoint& a, const Waypoint& b) {
  const double chord = std::hypot(b.x - a.x, b.y - a.y);
  if (chord < 1e-9) return 0.0;
  return 2.0 * std::sin(0.5 * wrap_angle(b.psi - a.psi)) / chord;
}

}  // namespace

double BurnIn::end_curvature() const {
  if (records.size() < 2) return 0.0;
  return segment_curvature(records[records.size() - 2].waypoint, records.back().waypoint);
}

void write_burnin_csv(std::ostream& out, const BurnIn& burnin) {
  out << "t,v_lon,v_lat,gear,x,y,v,psi\n";
  for (std::size_t i = 0; i < burnin.records.size(); ++i) {
    const auto& r = burnin.records[i];
    out << format_number(static_cast<double>(i) / burnin.rate_hz) << ','
        << format_number(r.v_lon) << ',' << format_number(r.v_lat) << ',' << r.gear << ','
        << format_number(r.waypoint.x) << ',' << format_number(r.waypoint.y) << ','
        << format_number(r.waypoint.v) << ',' << format_number(r.waypoint.psi) << '\n';
  }
}

void write_burnin_csv(const std::filesystem::path& path, const BurnIn& burnin) {
  auto out = open_output(path);
  write_burnin_csv(out, burnin);
}

BurnIn parse_burnin_csv(std::istream& in) {
  const CsvTable table = parse_csv(in);
  const std::size_t ct = table.column("t"), cvl = table.column("v_lon"),
                    cvt = table.column("v_lat"), cg = table.column("gear"),
                    cx = table.column("x"), cy = table.column("y"), cv = table.column("v"),
                    cp = table.column("psi");
  BurnIn b;
  std::vector<double> times;
  for (const auto& row : table.rows) {
    times.push_back(parse_number(row[ct]));
    BurnInRecord r;
    r.v_lon = parse_number(row[cvl]);
    r.v_lat = parse_number(row[cvt]);
    const double gear = parse_number(row[cg]);
    if (gear != std::floor(gear) || gear < 1) throw std::invalid_argument("burn-in gear invalid");
    r.gear = static_cast<int>(gear);
    r.waypoint = {parse_number(row[cx]), parse_number(row[cy]), parse_number(row[cv]),
                  parse_number(row[cp])};
    b.records.push_back(r);
  }
  if (times.size() >= 2) {
    const double spacing = times[1] - times[0];
    if (!(spacing > 0.0)) throw std::invalid_argument("burn-in CSV times must increase");
    double rate = 1.0 / spacing;
    if (std::abs(rate - std::round(rate)) < 1e-6) rate = std::round(rate);
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (std::abs((times[i] - times[i - 1]) * rate - 1.0) > 1e-6) {
        throw std::invalid_argument("burn-in CSV is not uniformly sampled");
      }
    }
    b.rate_hz = rate;
  }
  b.validate();
  return b;
}

BurnIn read_burnin_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  BurnIn b = parse_burnin_csv(in);
  b.name = path.stem().string();
  return b;
}

BurnIn make_arc_burnin(std::string name, double curvature, double speed, double accel,
                       std::size_t steps, double rate_hz) {
  BurnIn b;
  b.name = std::move(name);
  b.rate_hz = rate_hz;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / rate_hz;
    const double v = speed + accel * t;
    if (v < 0.0) throw std::invalid_argument("make_arc_burnin: speed becomes negative");
    const double s = speed * t + 0.5 * accel * t * t;
    const double psi = curvature * s;
    Waypoint w;
    if (std::abs(psi) < 1e-12) {
      w.x = s;
      w.y = 0.0;
    } else {
      w.x = std::sin(psi) / curvature;
      w.y = (1.0 - std::cos(psi)) / curvature;
    }
    w.v = v;
    w.psi = wrap_angle(psi);
    b.records.push_back({v, 0.0, 1, w});
  }
  b.validate();
  return b;
}

std::vector<BurnIn> builtin_initial_conditions() {
  return {
      make_arc_burnin("roundabout_left", 1.0 / 18.0, 6.0, 0.0, 10, 10.0),
      make_arc_burnin("roundabout_right", -1.0 / 20.0, 7.0, 0.0, 10, 10.0),
      make_arc_burnin("corner_approach", 0.0, 9.0, -1.5, 10, 10.0),
      make_arc_burnin("straight_cruise", 0.0, 6.0, 0.0, 10, 10.0),
  };
}

VehicleState burn_in_initial_state(const BurnIn& burnin, const VehicleParams& vehicle) {
  burnin.validate();
  const double kappa = burnin.records.size() >= 2
                           ? segment_curvature(burnin.records[0].waypoint,
                                               burnin.records[1].waypoint)
                           : 0.0;
  const double limit = max_curvature(vehicle);
  if (std::abs(kappa) > limit || std::abs(burnin.end_curvature()) > limit) {
    throw std::invalid_argument("initial condition '" + burnin.name + "' needs curvature " +
                                fmt(std::max(std::abs(kappa), std::abs(burnin.end_curvature()))) +
                                " beyond the max_steer limit " + fmt(limit) + " of " +
                                vehicle.name);
  }
  const auto& r = burnin.records.front();
  VehicleState s;
  s.x = r.waypoint.x;
  s.y = r.waypoint.y;
  s.yaw = wrap_angle(r.waypoint.psi);
  s.v_lon = std::clamp(r.v_lon, 0.0, vehicle.max_speed);
  s.steer_angle = std::atan(vehicle.wheelbase * kappa);
  s.gear = vehicle.gear_for_speed(s.v_lon);
  return s;
}

VehicleState burn_in_execute(const GaussianPolicy& policy, const VehicleParams& vehicle,
                             const BurnIn& burnin, double epsilon) {
  const VehicleState initial = burn_in_initial_state(burnin, vehicle);
  const std::size_t u = burnin.steps();
  if (u == 0) return initial;

  const int horizon = policy.horizon();
  TargetTrajectory target;
  target.rate_hz = burnin.rate_hz;
  for (std::size_t i = 1; i <= u; ++i) target.waypoints.push_back(burnin.records[i].waypoint);
  PathState s;
  const Waypoint& end = burnin.records.back().waypoint;
  s.x = end.x;
  s.y = end.y;
  s.heading = end.psi;
  s.v = end.v;
  s.kappa = burnin.end_curvature();
  for (int i = 0; i < horizon; ++i) {
    s.advance(1.0 / burnin.rate_hz);
    target.waypoints.push_back(s.waypoint());
  }

  EnvConfig config;
  config.epsilon = epsilon;
  config.horizon = horizon;
  WaypointEnv env(vehicle, target, config);
  env.reset(initial);
  for (std::size_t i = 0; i < u; ++i) {
    const StepResult r = env.step(policy.mean_action(env.observation()));
    if (r.termination == Termination::kDistanceExceeded) {
      throw std::runtime_error("burn-in '" + burnin.name + "': " + vehicle.name +
                               " left the epsilon corridor at step " + std::to_string(i + 1) +
                               " (d = " + fmt(env.trace().distances.back()) + ")");
    }
  }
  return env.state();
}

// ---------------------------------------------------------------------------
// Prior

void PriorConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("PriorConfig: ") + what);
  };
  require(num_modes >= 1, "num_modes must be >= 1");
  require(max_mode_curvature >= 0.0, "max_mode_curvature must be >= 0");
  require(turn_heading > 0.0, "turn_heading must be > 0");
  require(curvature_rate > 0.0, "curvature_rate must be > 0");
  require(curvature_noise >= 0.0, "curvature_noise must be >= 0");
  require(curvature_time_constant > 0.0, "curvature_time_constant must be > 0");
  require(speed_noise >= 0.0, "speed_noise must be >= 0");
  require(speed_time_constant > 0.0, "speed_time_constant must be > 0");
  require(horizon >= 2, "horizon must be >= 2");
  require(rate_hz > 0.0, "rate_hz must be > 0");
  require(corridor_half_width > 0.0, "corridor_half_width must be > 0");
  require(max_redraws >= 1, "max_redraws must be >= 1");
}

double PriorConfig::mode_curvature(int mode) const {
  if (num_modes == 1) return 0.0;
  return -max_mode_curvature + 2.0 * max_mode_curvature * mode / (num_modes - 1);
}

#define WPR_PRIOR_FIELDS(X)                                                                 \
  X(num_modes) X(max_mode_curvature) X(turn_heading) X(curvature_rate) X(curvature_noise) \
  X(curvature_time_constant) X(speed_noise) X(speed_time_constant) X(horizon) X(rate_hz)   \
  X(corridor_half_width) X(max_redraws)

std::string prior_config_to_json(const PriorConfig& c) {
  nlohmann::json j;
#define X(field) j[#field] = c.field;
  WPR_PRIOR_FIELDS(X)
#undef X
  return j.dump(2);
}

PriorConfig prior_config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("prior config must be a JSON object");
  PriorConfig c;
  std::vector<std::string> known;
#define X(field)                           \
  known.push_back(#field);                 \
  if (j.contains(#field)) j.at(#field).get_to(c.field);
  WPR_PRIOR_FIELDS(X)
#undef X
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw std::invalid_argument("unknown prior config field '" + key + "'");
    }
  }
  c.validate();
  return c;
}

#undef WPR_PRIOR_FIELDS

namespace {

/// One realization of the curvature/speed process. With rng == nullptr the
/// noise terms vanish and the target speed stays at the burn-in speed.
std::vector<Waypoint> simulate_prior(const BurnIn& burnin, const PriorConfig& config, int mode,
                                     int length, std::mt19937_64* rng) {
  const Waypoint& end = burnin.records.back().waypoint;
  PathState s;
  s.x = end.x;
  s.y = end.y;
  s.heading = end.psi;
  s.v = std::max(0.0, burnin.records.back().v_lon);
  double kappa_nominal = burnin.end_curvature();
  double noise = 0.0;

  std::normal_distribution<double> normal(0.0, 1.0);
  double v_target = s.v;
  if (rng) v_target = std::max(0.0, s.v + config.speed_noise * normal(*rng));

  const double kappa_mode = config.mode_curvature(mode);
  const bool turning = kappa_mode != 0.0;
  bool turn_done = !turning;
  const double heading0 = s.heading;
  const double h = 1.0 / (config.rate_hz * kPriorSubsteps);
  const double tau = config.curvature_time_constant;
  const double noise_scale = config.curvature_noise * std::sqrt(2.0 * h / tau);

  std::vector<Waypoint> out;
  out.reserve(static_cast<std::size_t>(length));
  for (int step = 0; step < length; ++step) {
    for (int sub = 0; sub < kPriorSubsteps; ++sub) {
      if (!turn_done) {
        const double ramp_out =
            s.v * 0.5 * kappa_nominal * std::abs(kappa_nominal) / config.curvature_rate;
        if (sign(kappa_mode) * (s.heading - heading0 + ramp_out) >= config.turn_heading) {
          turn_done = true;
        }
      }
      const double target = turn_done ? 0.0 : kappa_mode;
      kappa_nominal = move_toward(kappa_nominal, target, config.curvature_rate * h);
      if (rng) noise += -noise * h / tau + noise_scale * normal(*rng);
      s.kappa = kappa_nominal + noise;
      s.v += (v_target - s.v) * h / config.speed_time_constant;
      s.advance(h);
    }
    out.push_back(s.waypoint());
  }
  return out;
}

double distance_to_polyline(const Eigen::Vector2d& p, const std::vector<Eigen::Vector2d>& line) {
  double best = (p - line.front()).norm();
  for (std::size_t i = 1; i < line.size(); ++i) {
    const Eigen::Vector2d a = line[i - 1];
    const Eigen::Vector2d ab = line[i] - a;
    const double len2 = ab.squaredNorm();
    const double u = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (p - (a + u * ab)).norm());
  }
  return best;
}

}  // namespace

TargetTrajectory nominal_prior_path(const BurnIn& burnin, const PriorConfig& config, int mode,
                                    int length) {
  burnin.validate();
  config.validate();
  TargetTrajectory t;
  t.rate_hz = config.rate_hz;
  t.waypoints = simulate_prior(burnin, config, mode, length, nullptr);
  return t;
}

PriorSample sample_prior_detailed(const BurnIn& burnin, const PriorConfig& config,
                                  std::mt19937_64& rng) {
  burnin.validate();
  config.validate();
  std::uniform_int_distribution<int> pick_mode(0, config.num_modes - 1);
  const Waypoint& end = burnin.records.back().waypoint;

  for (int attempt = 0; attempt < config.max_redraws; ++attempt) {
    const int mode = pick_mode(rng);
    std::vector<Waypoint> sample = simulate_prior(burnin, config, mode, config.horizon, &rng);

    // A faster draw travels further than the nominal path, so the centerline
    // is extended well past the horizon.
    const std::vector<Waypoint> nominal =
        simulate_prior(burnin, config, mode, 2 * config.horizon, nullptr);
    std::vector<Eigen::Vector2d> line{{end.x, end.y}};
    for (const auto& w : nominal) line.push_back(w.position());
    bool inside = true;
    for (const auto& w : sample) {
      if (distance_to_polyline(w.position(), line) > config.corridor_half_width) {
        inside = false;
        break;
      }
    }
    if (inside) {
      PriorSample out;
      out.trajectory.rate_hz = config.rate_hz;
      out.trajectory.waypoints = std::move(sample);
      out.mode = mode;
      out.redraws = attempt;
      return out;
    }
  }
  throw std::runtime_error("sample_prior: " + std::to_string(config.max_redraws) +
                           " consecutive draws left the corridor of half-width " +
                           fmt(config.corridor_half_width) + " m");
}

TargetTrajectory sample_prior(const BurnIn& burnin, const PriorConfig& config,
                              std::mt19937_64& rng) {
  return sample_prior_detailed(burnin, config, rng).trajectory;
}

double max_path_curvature(const TargetTrajectory& trajectory) {
  double best = 0.0;
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    best = std::max(best, std::abs(segment_curvature(trajectory.waypoints[i - 1],
                                                     trajectory.waypoints[i])));
  }
  return best;
}

}  // namespace wpr
