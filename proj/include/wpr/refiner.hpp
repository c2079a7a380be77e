#ifndef WPR_REFINER_HPP_
#define WPR_REFINER_HPP_

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "wpr/behavior_prior.hpp"
#include "wpr/policy.hpp"
#include "wpr/vehicle.hpp"
#include "wpr/waypoint_env.hpp"

namespace wpr {

/// Bernoulli optimality variables with log p(O_t = 1) = r_t - log Z_0. The
/// normalizer never takes a numeric value: every quantity computed from it is
/// invariant to an additive constant.
struct OptimalityModel {
  double epsilon = 1.0;
  double log_z_per_step = 0.0;
  int horizon = 90;

  double log_z_total() const { return horizon * log_z_per_step; }
};

struct WeightedTrajectory {
  TargetTrajectory trajectory;
  double s0_value = 0.0;
  double weight = 0.0;  // normalized over the batch
};

/// V(s0) against the first `horizon` waypoints of the candidate. Throws
/// std::invalid_argument when `horizon` differs from the network's.
double score_s0(const ValueNet& value_net, const VehicleParams& vehicle,
                const TargetTrajectory& trajectory, const VehicleState& s0, int horizon);

/// softmax(scores) with max subtraction. Throws on empty or non-finite input.
std::vector<double> importance_weights(std::span<const double> scores);

/// log(mean(exp(scores))), stabilized. Throws on empty or non-finite input.
double log_evidence(std::span<const double> scores);

/// `count` i.i.d. indices from Discrete(weights).
std::vector<std::size_t> resample(std::span<const double> weights, std::mt19937_64& rng,
                                  std::size_t count);

using PriorSampler = std::function<TargetTrajectory(std::mt19937_64&)>;

struct RefineResult {
  std::size_t selected = 0;
  TargetTrajectory trajectory;  // candidates[selected].trajectory
  std::vector<WeightedTrajectory> candidates;
  VehicleState s0;
  double log_evidence = 0.0;
};

/// Burns in once, draws L prior samples, scores and weights them, and
/// resamples one index.
RefineResult refine(const PriorSampler& prior, const GaussianPolicy& policy,
                    const ValueNet& value_net, const VehicleParams& vehicle, const BurnIn& burnin,
                    std::size_t num_samples, double epsilon, std::mt19937_64& rng);

/// Adapts sample_prior to a PriorSampler.
PriorSampler make_prior_sampler(BurnIn burnin, PriorConfig config);

}  // namespace wpr

#endif  // WPR_REFINER_HPP_
