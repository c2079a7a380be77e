#ifndef WPR_EVALUATION_HPP_
#define WPR_EVALUATION_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "wpr/behavior_prior.hpp"
#include "wpr/policy.hpp"
#include "wpr/vehicle.hpp"
#include "wpr/waypoint_env.hpp"

namespace wpr {

/// Rolls the mean-action policy from s0 against the trajectory until the
/// episode terminates.
EpisodeTrace execute_follower(const GaussianPolicy& policy, const VehicleParams& vehicle,
                              const TargetTrajectory& trajectory, const VehicleState& s0,
                              double epsilon);

/// Hit fraction of the mean-action policy on each scenario, started from the
/// scenario's start state.
std::vector<double> scenario_hit_fractions(const GaussianPolicy& policy,
                                           const VehicleParams& vehicle,
                                           std::span<const TargetTrajectory> scenarios,
                                           double epsilon);

/// Rank correlation with average ranks for ties. NaN if either input is
/// constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct VehicleEntry {
  std::string name;
  std::filesystem::path policy;
  std::filesystem::path value;
  std::filesystem::path training_log;  // optional
  double epsilon = 1.0;
};

struct ExperimentConfig {
  std::vector<VehicleEntry> vehicles;
  std::filesystem::path fleet;  // optional; built-in fleet when empty
  std::vector<std::uint64_t> seeds{0};
  std::size_t num_samples = 100;  // L
  std::size_t num_posterior_draws = 20;
  std::vector<std::filesystem::path> initial_conditions;  // burn-in CSVs; built-ins when empty
  PriorConfig prior;

  void validate() const;
};

/// Relative paths resolve against the config file's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir);

struct VehicleModel {
  VehicleParams params;
  GaussianPolicy policy;
  ValueNet value;
  double epsilon = 1.0;
  std::filesystem::path training_log;
};

struct Experiment {
  std::vector<VehicleModel> vehicles;
  std::vector<BurnIn> initial_conditions;
  std::vector<std::uint64_t> seeds;
  std::size_t num_samples = 100;
  std::size_t num_posterior_draws = 20;
  PriorConfig prior;
};

/// Verifies every artifact path before loading any of them.
Experiment load_experiment(const ExperimentConfig& config);

struct SampleRow {
  std::string vehicle;
  std::string ic;
  std::uint64_t seed = 0;
  std::size_t sample_id = 0;
  double s0_value = 0.0;
  double weight = 0.0;
  double hit_fraction = 0.0;
  std::size_t posterior_draws = 0;  // times the index was resampled
};

struct SeedResult {
  std::string vehicle;
  std::string ic;
  std::uint64_t seed = 0;
  double prior_mean_hit = 0.0;
  double posterior_mean_hit = 0.0;  // mean over resampled executions
  double weighted_mean_hit = 0.0;   // importance-weighted expectation over the batch
  double spearman = 0.0;            // s0_value vs hit_fraction
  double log_evidence = 0.0;
};

struct CellResult {
  std::string vehicle;
  std::string ic;
  double prior_mean_hit = 0.0;
  double posterior_mean_hit = 0.0;
  double weighted_mean_hit = 0.0;
  std::size_t prior_n = 0;
  std::size_t posterior_n = 0;
  std::vector<std::uint64_t> seeds;
  double epsilon = 1.0;
};

struct ComparisonReport {
  std::vector<CellResult> cells;
  std::vector<SeedResult> seeds;
  std::vector<SampleRow> samples;
  std::vector<std::pair<std::string, std::filesystem::path>> training_logs;
};

/// One (vehicle, IC, seed) run: burn-in, L prior draws, scoring, execution of
/// every draw and of the resampled posterior set. Prior draws depend on
/// (seed, IC) only, so every vehicle sees the same batch.
SeedResult evaluate_seed(const VehicleModel& model, const BurnIn& ic, std::size_t ic_index,
                         std::uint64_t seed, std::size_t num_samples,
                         std::size_t num_posterior_draws, const PriorConfig& prior,
                         std::vector<SampleRow>* samples = nullptr);

ComparisonReport run_experiment(const Experiment& experiment);
ComparisonReport compare(const ExperimentConfig& config);

/// Writes comparison.csv, seeds.csv, samples.csv, summary.txt and copies the
/// training logs into training/.
void emit_report(const ComparisonReport& report, const std::filesystem::path& dir);
ComparisonReport read_report(const std::filesystem::path& dir);
std::string format_summary(const ComparisonReport& report);

}  // namespace wpr

#endif  // WPR_EVALUATION_HPP_
