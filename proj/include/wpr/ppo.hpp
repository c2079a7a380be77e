#ifndef WPR_PPO_HPP_
#define WPR_PPO_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "wpr/policy.hpp"
#include "wpr/vehicle.hpp"
#include "wpr/waypoint_env.hpp"

namespace wpr {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_ratio = 0.2;
  int epochs = 4;
  int minibatch_size = 64;
  double learning_rate = 3e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.5;
  int steps_per_update = 2048;
  long total_steps = 200000;

  int num_envs = 8;     // independent rollout workers, merged in index order
  int num_threads = 1;  // does not change results

  double epsilon = 1.0;
  int horizon = 30;
  int encoder_width = 64;
  int hidden_width = 64;
  double init_log_std = -0.5;
  double value_output_scale = 10.0;
  double init_position_jitter = 0.1;  // m
  double init_yaw_jitter = 0.02;      // rad

  // Fraction of episodes run on random probe turns instead of the given
  // scenarios. Probe curvature reaches probe_curvature_factor times the
  // vehicle's limit, so the critic also sees targets it cannot track.
  double probe_fraction = 0.5;
  double probe_curvature_factor = 1.3;

  void validate() const;
};

PpoConfig ppo_config_from_json(const std::string& text);
std::string ppo_config_to_json(const PpoConfig& config);

struct GaeResult {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

/// Generalized advantage estimation over one episode fragment.
/// `bootstrap` is the value after the last step: 0 for a terminated episode,
/// V(s_T) for a truncated one.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      double bootstrap, double gamma, double lambda);

/// Time-aligned rollout data; one column / entry per environment step.
struct RolloutBatch {
  Eigen::MatrixXd observations;  // normalized, obs_size x N
  Eigen::MatrixXd actions;       // raw Gaussian draws, 2 x N
  Eigen::VectorXd log_probs_old;
  Eigen::VectorXd rewards;
  Eigen::VectorXd values_old;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
  std::vector<std::size_t> episode_starts;  // indices where a new episode begins

  Eigen::Index size() const { return rewards.size(); }
};

/// Shifts and scales advantages to zero mean and unit variance in place.
void normalize_advantages(Eigen::VectorXd& advantages);

struct PpoLosses {
  double policy_loss = 0.0;
  double value_loss = 0.0;  // mean squared error, without the coefficient
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double total() const;
};

/// Loss and flat gradients for one minibatch. The objective minimized is
///   -mean(min(rho A, clip(rho) A)) + value_coef * mean((V - R)^2)
///   - entropy_coef * entropy.
struct LossGradient {
  PpoLosses losses;
  Eigen::VectorXd policy_grad;
  Eigen::VectorXd value_grad;
};

LossGradient ppo_loss_gradient(const GaussianPolicy& policy, const ValueNet& value_net,
                               const RolloutBatch& batch, std::span<const Eigen::Index> indices,
                               const PpoConfig& config);

class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  long steps() const { return t_; }

 private:
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  double lr_ = 3e-4;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
};

/// Scales `grad` so its Euclidean norm is at most max_norm; returns the
/// original norm.
double clip_grad_norm(Eigen::VectorXd& grad, double max_norm);

struct OptimizerState {
  Adam policy;
  Adam value;
};

/// Runs `epochs` passes of shuffled minibatch updates. Advantages in `batch`
/// are normalized first. Throws std::runtime_error on a non-finite loss,
/// leaving both networks untouched for that minibatch.
PpoLosses ppo_update(GaussianPolicy& policy, ValueNet& value_net, RolloutBatch& batch,
                     const PpoConfig& config, OptimizerState& optimizer, std::mt19937_64& rng);

struct TrainingRecord {
  long update = 0;
  long env_steps = 0;
  long episodes = 0;
  double mean_episode_reward = 0.0;
  double hit_fraction = 0.0;
  double value_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;
};

struct TrainingLog {
  std::vector<TrainingRecord> records;
  std::string abort_reason;  // empty unless training diverged

  void write_csv(const std::filesystem::path& path) const;
  void write_csv(std::ostream& out) const;
};

struct TrainingResult {
  GaussianPolicy policy;
  ValueNet value;
  TrainingLog log;
};

/// Per-vehicle PPO training. Each episode picks a scenario uniformly (or a
/// probe, with probability probe_fraction) and starts from its start state
/// with a small pose jitter. Logged hit fractions cover scenario episodes only. Identical seeds give
/// bit-identical results regardless of num_threads.
TrainingResult train(const VehicleParams& vehicle, std::span<const TargetTrajectory> scenarios,
                     const PpoConfig& config, std::uint64_t seed);

}  // namespace wpr

#endif  // WPR_PPO_HPP_
