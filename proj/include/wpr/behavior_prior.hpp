#ifndef WPR_BEHAVIOR_PRIOR_HPP_
#define WPR_BEHAVIOR_PRIOR_HPP_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "wpr/policy.hpp"
#include "wpr/vehicle.hpp"
#include "wpr/waypoint_env.hpp"

namespace wpr {

// ---------------------------------------------------------------------------
// Scripted expert scenarios

enum class ScenarioKind { kStraight, kLeftTurn, kRightTurn, kFullStop, kSShape };

std::string_view to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(std::string_view name);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kStraight;
  double entry_speed = 5.0;  // m/s
  double curvature = 0.0;    // 1/m, magnitude of the arcs (turn kinds)
  double decel = 0.0;        // m/s^2, braking rate (full_stop)
  int duration = 120;        // waypoints
  double rate_hz = 10.0;
};

std::string scenario_spec_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_spec_from_json(const std::string& text);

/// Fraction of each vehicle limit an expert scenario may use.
inline constexpr double kScenarioLimitMargin = 0.9;

/// Closed-form expert trajectory. The vehicle starts at the origin heading
/// along +x, one step before the first waypoint.
///
/// Turns cruise for one second, slow to 0.75 of the entry speed, ramp the
/// curvature in, hold it through 90 degrees of heading, ramp it out and
/// re-accelerate. The s-shape does the same with two opposite 60 degree arcs.
/// Curvature ramps use half the vehicle's steering-rate limit.
///
/// Throws std::invalid_argument naming the violated limit when the spec needs
/// more than kScenarioLimitMargin of the vehicle's curvature, braking, speed
/// or acceleration.
TargetTrajectory generate_scenario(const ScenarioSpec& spec, const VehicleParams& vehicle);

/// Straight, left turn, right turn, full stop and s-shape, sized for the
/// vehicle.
std::vector<ScenarioSpec> builtin_scenario_specs(const VehicleParams& vehicle);

/// Training probe: a target that starts on a constant arc and changes to a
/// new curvature, which may exceed what the vehicle can track.
struct ProbeScenario {
  TargetTrajectory trajectory;
  VehicleState start;
};

/// Initial curvature uniform in +-0.9 of the vehicle's limit (a third of
/// probes start straight), final curvature uniform in +-max_curvature_factor
/// of the limit, held for up to 90 degrees, then straightened. Entry speed is
/// in [0.5, 1] of the built-in entry speed; half of the probes brake to a
/// lower speed or a standstill.
ProbeScenario random_probe(const VehicleParams& vehicle, double max_curvature_factor,
                           int duration, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Burn-in conditioning

struct BurnInRecord {
  double v_lon = 0.0;
  double v_lat = 0.0;
  int gear = 1;
  Waypoint waypoint;
};

/// Observed records c_{-U..0}, time-ordered at rate_hz.
struct BurnIn {
  std::string name;
  std::vector<BurnInRecord> records;
  double rate_hz = 10.0;

  std::size_t steps() const { return records.empty() ? 0 : records.size() - 1; }  // U
  void validate() const;

  /// Signed path curvature at the final record, from the last heading change.
  double end_curvature() const;
};

/// Header t,v_lon,v_lat,gear,x,y,v,psi with t = 0 at the first record.
void write_burnin_csv(std::ostream& out, const BurnIn& burnin);
void write_burnin_csv(const std::filesystem::path& path, const BurnIn& burnin);
BurnIn parse_burnin_csv(std::istream& in);
BurnIn read_burnin_csv(const std::filesystem::path& path);

/// Constant-curvature burn-in of U steps (curvature 0 gives a straight line),
/// with a constant longitudinal acceleration. Starts at the origin heading +x.
BurnIn make_arc_burnin(std::string name, double curvature, double speed, double accel,
                       std::size_t steps, double rate_hz);

/// Two sustained arcs (roundabout-like) and two straight approaches, all
/// feasible for every built-in vehicle.
std::vector<BurnIn> builtin_initial_conditions();

/// Runs the mean-action policy along the burn-in for U steps, starting from
/// the first record, and returns the final state. The controller's lookahead
/// past the last record is padded with a constant-speed, constant-curvature
/// continuation.
///
/// Throws std::invalid_argument if the initial condition needs more curvature
/// than the vehicle has, and std::runtime_error if the vehicle leaves the
/// epsilon corridor.
VehicleState burn_in_execute(const GaussianPolicy& policy, const VehicleParams& vehicle,
                             const BurnIn& burnin, double epsilon);

/// Vehicle state matching the first burn-in record.
VehicleState burn_in_initial_state(const BurnIn& burnin, const VehicleParams& vehicle);

// ---------------------------------------------------------------------------
// Stochastic trajectory prior

struct PriorConfig {
  int num_modes = 7;                   // target curvatures evenly spaced in +-max_mode_curvature
  double max_mode_curvature = 0.15;    // 1/m
  double turn_heading = 1.5707963267948966;  // rad of heading change per turn
  double curvature_rate = 0.08;        // 1/m per s, nominal ramp rate
  double curvature_noise = 0.02;       // 1/m, stationary std of the OU term
  double curvature_time_constant = 0.8;  // s
  double speed_noise = 1.0;            // m/s, std of the target speed offset
  double speed_time_constant = 2.0;    // s
  int horizon = 90;                    // T
  double rate_hz = 10.0;
  double corridor_half_width = 4.0;    // m around the mode's nominal path
  int max_redraws = 100;

  void validate() const;
  double mode_curvature(int mode) const;
};

std::string prior_config_to_json(const PriorConfig& config);
PriorConfig prior_config_from_json(const std::string& text);

struct PriorSample {
  TargetTrajectory trajectory;
  int mode = 0;
  int redraws = 0;
};

/// Draws one trajectory continuing the burn-in. Vehicle-agnostic.
/// Throws std::runtime_error when max_redraws corridor rejections occur.
PriorSample sample_prior_detailed(const BurnIn& burnin, const PriorConfig& config,
                                  std::mt19937_64& rng);
TargetTrajectory sample_prior(const BurnIn& burnin, const PriorConfig& config,
                              std::mt19937_64& rng);

/// Noise-free path of one mode, used as the rejection corridor's centerline.
TargetTrajectory nominal_prior_path(const BurnIn& burnin, const PriorConfig& config, int mode,
                                    int length);

/// Largest |curvature| between consecutive waypoint segments.
double max_path_curvature(const TargetTrajectory& trajectory);

}  // namespace wpr

#endif  // WPR_BEHAVIOR_PRIOR_HPP_
