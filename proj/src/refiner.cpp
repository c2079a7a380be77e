#include "wpr/refiner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wpr {

namespace {

void check_scores(std::span<const double> scores, const char* who) {
  if (scores.empty()) throw std::invalid_argument(std::string(who) + ": no scores");
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument(std::string(who) + ": non-finite score");
  }
}

}  // namespace

double score_s0(const ValueNet& value_net, const VehicleParams& vehicle,
                const TargetTrajectory& trajectory, const VehicleState& s0, int horizon) {
  if (horizon != value_net.horizon()) {
    throw std::invalid_argument("score_s0: horizon " + std::to_string(horizon) +
                                " does not match the value network's " +
                                std::to_string(value_net.horizon()));
  }
  (void)vehicle;
  return value(value_net, observe(s0, trajectory, 0, horizon));
}

std::vector<double> importance_weights(std::span<const double> scores) {
  check_scores(scores, "importance_weights");
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> w(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(scores[i] - top);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

double log_evidence(std::span<const double> scores) {
  check_scores(scores, "log_evidence");
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (double s : scores) total += std::exp(s - top);
  return top + std::log(total / static_cast<double>(scores.size()));
}

std::vector<std::size_t> resample(std::span<const double> weights, std::mt19937_64& rng,
                                  std::size_t count) {
  if (weights.empty()) throw std::invalid_argument("resample: no weights");
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = pick(rng);
  return out;
}

RefineResult refine(const PriorSampler& prior, const GaussianPolicy& policy,
                    const ValueNet& value_net, const VehicleParams& vehicle, const BurnIn& burnin,
                    std::size_t num_samples, double epsilon, std::mt19937_64& rng) {
  if (num_samples == 0) throw std::invalid_argument("refine: L must be >= 1");
  RefineResult out;
  out.s0 = burn_in_execute(policy, vehicle, burnin, epsilon);
  std::vector<double> scores;
  scores.reserve(num_samples);
  for (std::size_t l = 0; l < num_samples; ++l) {
    WeightedTrajectory c;
    c.trajectory = prior(rng);
    c.s0_value = score_s0(value_net, vehicle, c.trajectory, out.s0, value_net.horizon());
    scores.push_back(c.s0_value);
    out.candidates.push_back(std::move(c));
  }
  const std::vector<double> w = importance_weights(scores);
  for (std::size_t l = 0; l < num_samples; ++l) out.candidates[l].weight = w[l];
  out.log_evidence = log_evidence(scores);
  out.selected = resample(w, rng, 1).front();
  out.trajectory = out.candidates[out.selected].trajectory;
  return out;
}

PriorSampler make_prior_sampler(BurnIn burnin, PriorConfig config) {
  return [burnin = std::move(burnin), config = std::move(config)](std::mt19937_64& rng) {
    return sample_prior(burnin, config, rng);
  };
}

}  // namespace wpr
