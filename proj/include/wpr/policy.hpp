#ifndef WPR_POLICY_HPP_
#define WPR_POLICY_HPP_

#include <filesystem>
#include <random>

#include <Eigen/Core>

#include "wpr/mlp.hpp"
#include "wpr/vehicle.hpp"
#include "wpr/waypoint_env.hpp"

namespace wpr {

/// Running mean/variance over flattened observations (Chan's parallel update).
class ObservationNormalizer {
 public:
  ObservationNormalizer() = default;
  explicit ObservationNormalizer(Eigen::Index size);

  void update(const Eigen::MatrixXd& batch);  // one observation per column
  Eigen::MatrixXd normalize(const Eigen::MatrixXd& batch) const;
  Eigen::VectorXd normalize(const Eigen::VectorXd& obs) const;

  Eigen::Index size() const { return mean_.size(); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& var() const { return var_; }
  double count() const { return count_; }
  void set_state(Eigen::VectorXd mean, Eigen::VectorXd var, double count);

  static constexpr double kClip = 10.0;
  static constexpr double kVarFloor = 1e-8;

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd var_;
  double count_ = 0.0;
};

/// Waypoint-window encoder followed by a tanh trunk. Input rows are the
/// flattened observation: three vehicle scalars, then the 3H window.
struct FeatureNet {
  nn::MlpD encoder;  // 3H -> encoder width
  nn::MlpD trunk;    // 3 + encoder width -> hidden -> hidden

  struct Cache {
    nn::ForwardCache<double> encoder;
    nn::ForwardCache<double> trunk;
  };

  static FeatureNet make(int horizon, Eigen::Index encoder_width, Eigen::Index hidden_width);

  int horizon() const { return static_cast<int>(encoder.input_size() / 3); }
  Eigen::Index input_size() const { return 3 + encoder.input_size(); }
  Eigen::Index feature_size() const { return trunk.output_size(); }
  Eigen::Index parameter_count() const;

  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& input, Cache& cache) const;
  /// Accumulates parameter gradients into `grad`.
  void backward(const Cache& cache, const Eigen::MatrixXd& feature_grad, FeatureNet& grad) const;
  FeatureNet zeros_like() const;
};

struct NetworkShape {
  int horizon = 30;
  Eigen::Index encoder_width = 64;
  Eigen::Index hidden_width = 64;
};

/// Diagonal Gaussian over (steer, pedal) with state-independent log std.
class GaussianPolicy {
 public:
  static constexpr double kMinLogStd = -5.0;
  static constexpr double kMaxLogStd = 2.0;

  GaussianPolicy() = default;
  GaussianPolicy(const NetworkShape& shape, double init_log_std);

  template <typename Rng>
  void randomize(Rng& rng) {
    body_.encoder.randomize(rng, 1.0, 1.0);
    body_.trunk.randomize(rng, 1.0, 1.0);
    head_.randomize(rng, 1.0, 0.01);
  }

  int horizon() const { return body_.horizon(); }
  Eigen::Index parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& params);

  const FeatureNet& body() const { return body_; }
  FeatureNet& body() { return body_; }
  const nn::MlpD& mean_head() const { return head_; }
  nn::MlpD& mean_head() { return head_; }
  Eigen::Vector2d log_std() const { return log_std_; }
  void set_log_std(const Eigen::Vector2d& log_std);
  const ObservationNormalizer& normalizer() const { return normalizer_; }
  ObservationNormalizer& normalizer() { return normalizer_; }

  /// Means for a batch of already-normalized observations.
  Eigen::MatrixXd mean(const Eigen::MatrixXd& normalized_obs) const;
  Eigen::Vector2d mean(const Observation& obs) const;
  Action mean_action(const Observation& obs) const;

 private:
  FeatureNet body_;
  nn::MlpD head_;
  Eigen::Vector2d log_std_ = Eigen::Vector2d::Zero();
  ObservationNormalizer normalizer_;
};

struct PolicySample {
  Action action;          // clamped to the action box
  Eigen::Vector2d raw;    // pre-clamp Gaussian draw
  double log_prob = 0.0;  // density of `raw`
};

PolicySample policy_sample(const GaussianPolicy& policy, const Observation& obs,
                           std::mt19937_64& rng);
double policy_log_prob(const GaussianPolicy& policy, const Observation& obs,
                       const Eigen::Vector2d& raw_action);
double gaussian_log_prob(const Eigen::Vector2d& x, const Eigen::Vector2d& mean,
                         const Eigen::Vector2d& log_std);
double policy_entropy(const GaussianPolicy& policy);

/// Batched log-density pass kept for the reverse sweep.
struct LogProbPass {
  FeatureNet::Cache body;
  nn::ForwardCache<double> head;
  Eigen::MatrixXd mean;
  Eigen::MatrixXd actions;
  Eigen::VectorXd log_probs;
};

LogProbPass policy_log_prob_forward(const GaussianPolicy& policy,
                                    const Eigen::MatrixXd& normalized_obs,
                                    const Eigen::MatrixXd& raw_actions);

/// Flat gradient (parameters() layout) of
///   sum_i dloss_dlogp[i] * log_prob_i + dloss_dlogstd . log_std.
Eigen::VectorXd policy_log_prob_backward(const GaussianPolicy& policy, const LogProbPass& pass,
                                         const Eigen::VectorXd& dloss_dlogp,
                                         const Eigen::Vector2d& dloss_dlogstd);

class ValueNet {
 public:
  ValueNet() = default;
  ValueNet(const NetworkShape& shape, double output_scale);

  template <typename Rng>
  void randomize(Rng& rng) {
    body_.encoder.randomize(rng, 1.0, 1.0);
    body_.trunk.randomize(rng, 1.0, 1.0);
    head_.randomize(rng, 1.0, 1.0);
  }

  int horizon() const { return body_.horizon(); }
  double output_scale() const { return output_scale_; }
  Eigen::Index parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& params);

  const FeatureNet& body() const { return body_; }
  FeatureNet& body() { return body_; }
  const nn::MlpD& head() const { return head_; }
  nn::MlpD& head() { return head_; }
  const ObservationNormalizer& normalizer() const { return normalizer_; }
  ObservationNormalizer& normalizer() { return normalizer_; }

  Eigen::VectorXd values(const Eigen::MatrixXd& normalized_obs) const;

 private:
  FeatureNet body_;
  nn::MlpD head_;  // hidden -> 1
  double output_scale_ = 1.0;
  ObservationNormalizer normalizer_;
};

double value(const ValueNet& net, const Observation& obs);

struct ValuePass {
  FeatureNet::Cache body;
  nn::ForwardCache<double> head;
  Eigen::VectorXd values;
};

ValuePass value_forward(const ValueNet& net, const Eigen::MatrixXd& normalized_obs);
/// Flat gradient (parameters() layout) of sum_i dloss_dvalue[i] * V_i.
Eigen::VectorXd value_backward(const ValueNet& net, const ValuePass& pass,
                               const Eigen::VectorXd& dloss_dvalue);

/// Checkpoints: `<stem>.json` manifest plus `<stem>.bin` little-endian
/// float64 parameters in manifest order. `path` names the manifest.
void save_policy(const GaussianPolicy& policy, const std::filesystem::path& path);
GaussianPolicy load_policy(const std::filesystem::path& path);
void save_value(const ValueNet& net, const std::filesystem::path& path);
ValueNet load_value(const std::filesystem::path& path);

}  // namespace wpr

#endif  // WPR_POLICY_HPP_
