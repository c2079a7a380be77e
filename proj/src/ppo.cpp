#include "wpr/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "wpr/behavior_prior.hpp"
#include "wpr/csv_io.hpp"

namespace wpr {

// ---------------------------------------------------------------------------
// Configuration

void PpoConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("PpoConfig: ") + what);
  };
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda must lie in [0, 1]");
  require(clip_ratio > 0.0, "clip_ratio must be > 0");
  require(epochs > 0, "epochs must be > 0");
  require(minibatch_size > 0, "minibatch_size must be > 0");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(value_coef >= 0.0, "value_coef must be >= 0");
  require(entropy_coef >= 0.0, "entropy_coef must be >= 0");
  require(max_grad_norm > 0.0, "max_grad_norm must be > 0");
  require(steps_per_update > 0, "steps_per_update must be > 0");
  require(total_steps > 0, "total_steps must be > 0");
  require(num_envs > 0 && steps_per_update % num_envs == 0,
          "num_envs must be > 0 and divide steps_per_update");
  require(num_threads > 0, "num_threads must be > 0");
  require(epsilon > 0.0, "epsilon must be > 0");
  require(horizon > 0, "horizon must be > 0");
  require(encoder_width > 0 && hidden_width > 0, "network widths must be > 0");
  require(value_output_scale > 0.0, "value_output_scale must be > 0");
  require(init_position_jitter >= 0.0 && init_yaw_jitter >= 0.0, "jitter must be >= 0");
  require(probe_fraction >= 0.0 && probe_fraction <= 1.0, "probe_fraction must lie in [0, 1]");
  require(probe_curvature_factor > 0.2, "probe_curvature_factor must be > 0.2");
}

#define WPR_PPO_FIELDS(X)                                                                   \
  X(gamma) X(gae_lambda) X(clip_ratio) X(epochs) X(minibatch_size) X(learning_rate)        \
  X(value_coef) X(entropy_coef) X(max_grad_norm) X(steps_per_update) X(total_steps)        \
  X(num_envs) X(num_threads) X(epsilon) X(horizon) X(encoder_width) X(hidden_width)        \
  X(init_log_std) X(value_output_scale) X(init_position_jitter) X(init_yaw_jitter)        \
  X(probe_fraction) X(probe_curvature_factor)

PpoConfig ppo_config_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("PPO config must be a JSON object");
  PpoConfig c;
  std::vector<std::string> known;
#define X(field)                                                   \
  known.push_back(#field);                                         \
  if (j.contains(#field)) j.at(#field).get_to(c.field);
  WPR_PPO_FIELDS(X)
#undef X
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw std::invalid_argument("unknown PPO config field '" + key + "'");
    }
  }
  c.validate();
  return c;
}

std::string ppo_config_to_json(const PpoConfig& c) {
  nlohmann::json j;
#define X(field) j[#field] = c.field;
  WPR_PPO_FIELDS(X)
#undef X
  return j.dump(2);
}

#undef WPR_PPO_FIELDS

// ---------------------------------------------------------------------------
// Advantage estimation

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      double bootstrap, double gamma, double lambda) {
  if (rewards.size() != values.size()) {
    throw std::invalid_argument("compute_gae: rewards and values differ in length");
  }
  const auto n = static_cast<Eigen::Index>(rewards.size());
  GaeResult out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  double next_value = bootstrap;
  double running = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const auto i = static_cast<std::size_t>(t);
    const double delta = rewards[i] + gamma * next_value - values[i];
    running = delta + gamma * lambda * running;
    out.advantages[t] = running;
    out.returns[t] = running + values[i];
    next_value = values[i];
  }
  return out;
}

void normalize_advantages(Eigen::VectorXd& advantages) {
  if (advantages.size() == 0) return;
  const double mean = advantages.mean();
  advantages.array() -= mean;
  const double var = advantages.squaredNorm() / static_cast<double>(advantages.size());
  advantages /= std::sqrt(var) + 1e-12;
  // Second centering pass removes the rounding residue of the first.
  advantages.array() -= advantages.mean();
}

// ---------------------------------------------------------------------------
// Losses and optimization

double PpoLosses::total() const { return policy_loss + value_loss - entropy; }

LossGradient ppo_loss_gradient(const GaussianPolicy& policy, const ValueNet& value_net,
                               const RolloutBatch& batch, std::span<const Eigen::Index> indices,
                               const PpoConfig& config) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  if (n == 0) throw std::invalid_argument("ppo_loss_gradient: empty minibatch");
  Eigen::MatrixXd obs(batch.observations.rows(), n);
  Eigen::MatrixXd actions(2, n);
  Eigen::VectorXd logp_old(n), adv(n), ret(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = indices[static_cast<std::size_t>(k)];
    obs.col(k) = batch.observations.col(i);
    actions.col(k) = batch.actions.col(i);
    logp_old[k] = batch.log_probs_old[i];
    adv[k] = batch.advantages[i];
    ret[k] = batch.returns[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);

  LossGradient out;
  const LogProbPass pass = policy_log_prob_forward(policy, obs, actions);
  Eigen::VectorXd dlogp(n);
  double surrogate = 0.0;
  double kl = 0.0;
  double clipped = 0.0;
  const double lo = 1.0 - config.clip_ratio;
  const double hi = 1.0 + config.clip_ratio;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double ratio = std::exp(pass.log_probs[k] - logp_old[k]);
    const double unclipped = ratio * adv[k];
    const double clipped_term = std::clamp(ratio, lo, hi) * adv[k];
    surrogate += std::min(unclipped, clipped_term);
    // Only the unclipped branch depends on the parameters.
    dlogp[k] = (unclipped <= clipped_term) ? -adv[k] * ratio * inv_n : 0.0;
    kl += logp_old[k] - pass.log_probs[k];
    if (ratio < lo || ratio > hi) clipped += 1.0;
  }
  out.losses.policy_loss = -surrogate * inv_n;
  out.losses.approx_kl = kl * inv_n;
  out.losses.clip_fraction = clipped * inv_n;
  out.losses.entropy = policy_entropy(policy);

  const Eigen::Vector2d dlogstd = Eigen::Vector2d::Constant(-config.entropy_coef);
  out.policy_grad = policy_log_prob_backward(policy, pass, dlogp, dlogstd);

  const ValuePass vpass = value_forward(value_net, obs);
  const Eigen::VectorXd err = vpass.values - ret;
  out.losses.value_loss = err.squaredNorm() * inv_n;
  out.value_grad = value_backward(value_net, vpass, err * (2.0 * config.value_coef * inv_n));
  return out;
}

Adam::Adam(Eigen::Index size, double learning_rate, double beta1, double beta2, double eps)
    : m_(Eigen::VectorXd::Zero(size)),
      v_(Eigen::VectorXd::Zero(size)),
      lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (grad.size() != m_.size() || params.size() != m_.size()) {
    throw std::invalid_argument("Adam: size mismatch");
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps_);
}

double clip_grad_norm(Eigen::VectorXd& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm) grad *= max_norm / (norm + 1e-12);
  return norm;
}

PpoLosses ppo_update(GaussianPolicy& policy, ValueNet& value_net, RolloutBatch& batch,
                     const PpoConfig& config, OptimizerState& optimizer, std::mt19937_64& rng) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw std::invalid_argument("ppo_update: empty batch");
  normalize_advantages(batch.advantages);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto mb = static_cast<std::size_t>(config.minibatch_size);

  PpoLosses sum;
  int count = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t len = std::min(mb, order.size() - start);
      const std::span<const Eigen::Index> idx(order.data() + start, len);
      LossGradient lg = ppo_loss_gradient(policy, value_net, batch, idx, config);
      if (!std::isfinite(lg.losses.total()) || !lg.policy_grad.allFinite() ||
          !lg.value_grad.allFinite()) {
        throw std::runtime_error("ppo_update: non-finite loss or gradient; update aborted");
      }
      clip_grad_norm(lg.policy_grad, config.max_grad_norm);
      clip_grad_norm(lg.value_grad, config.max_grad_norm);

      Eigen::VectorXd pp = policy.parameters();
      optimizer.policy.step(pp, lg.policy_grad);
      policy.set_parameters(pp);
      Eigen::VectorXd vp = value_net.parameters();
      optimizer.value.step(vp, lg.value_grad);
      value_net.set_parameters(vp);

      sum.policy_loss += lg.losses.policy_loss;
      sum.value_loss += lg.losses.value_loss;
      sum.entropy += lg.losses.entropy;
      sum.approx_kl += lg.losses.approx_kl;
      sum.clip_fraction += lg.losses.clip_fraction;
      ++count;
    }
  }
  const double inv = 1.0 / count;
  sum.policy_loss *= inv;
  sum.value_loss *= inv;
  sum.entropy *= inv;
  sum.approx_kl *= inv;
  sum.clip_fraction *= inv;
  return sum;
}

// ---------------------------------------------------------------------------
// Training log

void TrainingLog::write_csv(std::ostream& out) const {
  out << "update,env_steps,episodes,mean_episode_reward,hit_fraction,value_loss,policy_loss,"
         "entropy\n";
  for (const auto& r : records) {
    out << r.update << ',' << r.env_steps << ',' << r.episodes << ','
        << format_number(r.mean_episode_reward) << ',' << format_number(r.hit_fraction) << ','
        << format_number(r.value_loss) << ',' << format_number(r.policy_loss) << ','
        << format_number(r.entropy) << '\n';
  }
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
  auto out = open_output(path);
  write_csv(out);
}

// ---------------------------------------------------------------------------
// Rollout collection

namespace {

struct StepRecord {
  Eigen::VectorXd raw_obs;
  Eigen::VectorXd obs;  // normalized
  Eigen::Vector2d action;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool episode_end = false;
  double bootstrap = 0.0;  // used when episode_end
};

struct EpisodeStats {
  double total_reward = 0.0;
  double hit_fraction = 0.0;
};

struct Segment {
  std::vector<StepRecord> steps;
  double tail_bootstrap = 0.0;  // value after the last step if the episode continues
  std::vector<EpisodeStats> finished;
};

class RolloutWorker {
 public:
  RolloutWorker(const VehicleParams& vehicle, std::span<const TargetTrajectory> scenarios,
                const PpoConfig& config, std::uint64_t seed)
      : vehicle_(vehicle), scenarios_(scenarios), config_(config), rng_(seed) {}

  Segment collect(const GaussianPolicy& policy, const ValueNet& value_net, int steps) {
    Segment seg;
    seg.steps.reserve(static_cast<std::size_t>(steps));
    if (!env_ || env_->done()) begin_episode();
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Vector2d std = policy.log_std().array().exp();

    for (int k = 0; k < steps; ++k) {
      StepRecord rec;
      rec.raw_obs = env_->observation().flatten();
      rec.obs = policy.normalizer().normalize(rec.raw_obs);
      const Eigen::MatrixXd x = rec.obs;
      const Eigen::Vector2d mean = policy.mean(x).col(0);
      rec.value = value_net.values(x)[0];
      rec.action = {mean[0] + std[0] * normal(rng_), mean[1] + std[1] * normal(rng_)};
      rec.log_prob = gaussian_log_prob(rec.action, mean, policy.log_std());

      const StepResult result = env_->step(Action(rec.action[0], rec.action[1]));
      rec.reward = result.reward;
      episode_reward_ += result.reward;
      if (result.done) {
        rec.episode_end = true;
        if (result.termination == Termination::kTimeLimit) {
          const Eigen::MatrixXd next =
              value_net.normalizer().normalize(result.observation.flatten());
          rec.bootstrap = value_net.values(next)[0];
        }
        if (!probe_) {
          seg.finished.push_back({episode_reward_, hit_fraction(env_->trace(), config_.epsilon)});
        }
      }
      seg.steps.push_back(std::move(rec));
      if (result.done) begin_episode();
    }
    const Eigen::MatrixXd tail =
        value_net.normalizer().normalize(env_->observation().flatten());
    seg.tail_bootstrap = value_net.values(tail)[0];
    return seg;
  }

 private:
  void begin_episode() {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    probe_ = config_.probe_fraction > 0.0 && unit(rng_) < config_.probe_fraction;
    if (probe_) {
      ProbeScenario probe = random_probe(vehicle_, config_.probe_curvature_factor, 150, rng_);
      probe_trajectory_ = std::move(probe.trajectory);
      probe_start_ = probe.start;
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, scenarios_.size() - 1);
      probe_trajectory_ = scenarios_[pick(rng_)];
    }
    const TargetTrajectory& scenario = probe_trajectory_;
    EnvConfig env_config;
    env_config.epsilon = config_.epsilon;
    env_config.horizon = config_.horizon;
    env_ = std::make_unique<WaypointEnv>(vehicle_, scenario, env_config);

    VehicleState s0 = probe_ ? probe_start_ : start_state(scenario, vehicle_);
    const double r = config_.init_position_jitter * std::sqrt(unit(rng_));
    const double theta = 2.0 * std::numbers::pi * unit(rng_);
    s0.x += r * std::cos(theta);
    s0.y += r * std::sin(theta);
    s0.yaw = wrap_angle(s0.yaw + config_.init_yaw_jitter * (2.0 * unit(rng_) - 1.0));
    env_->reset(s0);
    episode_reward_ = 0.0;
  }

  const VehicleParams& vehicle_;
  std::span<const TargetTrajectory> scenarios_;
  const PpoConfig& config_;
  std::mt19937_64 rng_;
  std::unique_ptr<WaypointEnv> env_;
  TargetTrajectory probe_trajectory_;
  VehicleState probe_start_;
  bool probe_ = false;
  double episode_reward_ = 0.0;
};

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Appends one worker segment to the batch, computing GAE per episode fragment.
void append_segment(RolloutBatch& batch, Eigen::Index& cursor, const Segment& seg,
                    const PpoConfig& config) {
  std::size_t begin = 0;
  const std::size_t n = seg.steps.size();
  while (begin < n) {
    std::size_t end = begin;
    while (end < n && !seg.steps[end].episode_end) ++end;
    const bool terminal = end < n;
    const std::size_t stop = terminal ? end + 1 : n;
    const double bootstrap = terminal ? seg.steps[end].bootstrap : seg.tail_bootstrap;

    std::vector<double> rewards, values;
    for (std::size_t i = begin; i < stop; ++i) {
      rewards.push_back(seg.steps[i].reward);
      values.push_back(seg.steps[i].value);
    }
    const GaeResult gae = compute_gae(rewards, values, bootstrap, config.gamma, config.gae_lambda);
    batch.episode_starts.push_back(static_cast<std::size_t>(cursor));
    for (std::size_t i = begin; i < stop; ++i) {
      const StepRecord& s = seg.steps[i];
      const auto k = static_cast<Eigen::Index>(i - begin);
      batch.observations.col(cursor) = s.obs;
      batch.actions.col(cursor) = s.action;
      batch.log_probs_old[cursor] = s.log_prob;
      batch.rewards[cursor] = s.reward;
      batch.values_old[cursor] = s.value;
      batch.advantages[cursor] = gae.advantages[k];
      batch.returns[cursor] = gae.returns[k];
      ++cursor;
    }
    begin = stop;
  }
}

}  // namespace

TrainingResult train(const VehicleParams& vehicle, std::span<const TargetTrajectory> scenarios,
                     const PpoConfig& config, std::uint64_t seed) {
  config.validate();
  vehicle.validate();
  if (scenarios.empty()) throw std::invalid_argument("train: at least one scenario required");
  for (const auto& s : scenarios) s.validate();

  NetworkShape shape{config.horizon, config.encoder_width, config.hidden_width};
  TrainingResult result{GaussianPolicy(shape, config.init_log_std),
                        ValueNet(shape, config.value_output_scale), {}};
  std::mt19937_64 init_rng(derive_seed(seed, 0));
  result.policy.randomize(init_rng);
  result.value.randomize(init_rng);
  std::mt19937_64 update_rng(derive_seed(seed, 1));

  std::vector<RolloutWorker> workers;
  for (int w = 0; w < config.num_envs; ++w) {
    workers.emplace_back(vehicle, scenarios, config, derive_seed(seed, 100 + w));
  }
  OptimizerState optimizer{Adam(result.policy.parameter_count(), config.learning_rate),
                           Adam(result.value.parameter_count(), config.learning_rate)};

  const int per_worker = config.steps_per_update / config.num_envs;
  const Eigen::Index obs_size = observation_size(config.horizon);
  long env_steps = 0;
  long episodes = 0;
  long update = 0;
  while (env_steps < config.total_steps) {
    std::vector<Segment> segments(workers.size());
    const auto run = [&](std::size_t first, std::size_t stride) {
      for (std::size_t w = first; w < workers.size(); w += stride) {
        segments[w] = workers[w].collect(result.policy, result.value, per_worker);
      }
    };
    const auto threads = static_cast<std::size_t>(std::min(config.num_threads, config.num_envs));
    if (threads <= 1) {
      run(0, 1);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(run, t, threads);
    }

    const Eigen::Index n = config.steps_per_update;
    RolloutBatch batch;
    batch.observations.resize(obs_size, n);
    batch.actions.resize(2, n);
    batch.log_probs_old.resize(n);
    batch.rewards.resize(n);
    batch.values_old.resize(n);
    batch.advantages.resize(n);
    batch.returns.resize(n);
    Eigen::MatrixXd raw(obs_size, n);
    Eigen::Index cursor = 0;
    Eigen::Index raw_cursor = 0;
    double reward_sum = 0.0;
    double hit_sum = 0.0;
    long finished = 0;
    for (const auto& seg : segments) {
      append_segment(batch, cursor, seg, config);
      for (const auto& s : seg.steps) raw.col(raw_cursor++) = s.raw_obs;
      for (const auto& e : seg.finished) {
        reward_sum += e.total_reward;
        hit_sum += e.hit_fraction;
        ++finished;
      }
    }
    env_steps += n;
    episodes += finished;
    ++update;

    TrainingRecord record;
    record.update = update;
    record.env_steps = env_steps;
    record.episodes = episodes;
    record.mean_episode_reward =
        finished > 0 ? reward_sum / static_cast<double>(finished) : std::nan("");
    record.hit_fraction = finished > 0 ? hit_sum / static_cast<double>(finished) : std::nan("");

    try {
      const PpoLosses losses =
          ppo_update(result.policy, result.value, batch, config, optimizer, update_rng);
      record.value_loss = losses.value_loss;
      record.policy_loss = losses.policy_loss;
      record.entropy = losses.entropy;
    } catch (const std::runtime_error& e) {
      result.log.records.push_back(record);
      result.log.abort_reason = e.what();
      return result;
    }

    // Statistics move only between collection phases so stored observations
    // stay consistent with the log-probs recorded for them.
    result.policy.normalizer().update(raw);
    result.value.normalizer() = result.policy.normalizer();
    result.log.records.push_back(record);
    if (finished > 0 && !std::isfinite(record.mean_episode_reward)) {
      result.log.abort_reason = "mean episode reward is not finite";
      return result;
    }
  }
  return result;
}

}  // namespace wpr
