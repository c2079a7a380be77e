#include "wpr/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "wpr/csv_io.hpp"

namespace wpr {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)

}  // namespace

// ---------------------------------------------------------------------------
// ObservationNormalizer

ObservationNormalizer::ObservationNormalizer(Eigen::Index size)
    : mean_(Eigen::VectorXd::Zero(size)), var_(Eigen::VectorXd::Ones(size)) {}

void ObservationNormalizer::update(const Eigen::MatrixXd& batch) {
  if (batch.cols() == 0) return;
  if (batch.rows() != size()) throw std::invalid_argument("normalizer: dimension mismatch");
  const double n = static_cast<double>(batch.cols());
  const Eigen::VectorXd batch_mean = batch.rowwise().mean();
  const Eigen::VectorXd batch_var =
      (batch.colwise() - batch_mean).array().square().rowwise().mean();
  const Eigen::VectorXd delta = batch_mean - mean_;
  const double total = count_ + n;
  const Eigen::VectorXd m2 = var_ * count_ + batch_var * n +
                             delta.array().square().matrix() * (count_ * n / total);
  mean_ += delta * (n / total);
  var_ = m2 / total;
  count_ = total;
}

Eigen::MatrixXd ObservationNormalizer::normalize(const Eigen::MatrixXd& batch) const {
  if (batch.rows() != size()) throw std::invalid_argument("normalizer: dimension mismatch");
  const Eigen::ArrayXd inv_std = (var_.array() + kVarFloor).rsqrt();
  Eigen::MatrixXd out = ((batch.colwise() - mean_).array().colwise() * inv_std).matrix();
  return out.cwiseMax(-kClip).cwiseMin(kClip);
}

Eigen::VectorXd ObservationNormalizer::normalize(const Eigen::VectorXd& obs) const {
  return normalize(Eigen::MatrixXd(obs)).col(0);
}

void ObservationNormalizer::set_state(Eigen::VectorXd mean, Eigen::VectorXd var, double count) {
  if (mean.size() != var.size()) throw std::invalid_argument("normalizer: size mismatch");
  mean_ = std::move(mean);
  var_ = std::move(var);
  count_ = count;
}

// ---------------------------------------------------------------------------
// FeatureNet

FeatureNet FeatureNet::make(int horizon, Eigen::Index encoder_width, Eigen::Index hidden_width) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  FeatureNet f;
  f.encoder = nn::MlpD({3 * horizon, encoder_width}, nn::Activation::kTanh,
                       nn::Activation::kTanh);
  f.trunk = nn::MlpD({3 + encoder_width, hidden_width, hidden_width}, nn::Activation::kTanh,
                     nn::Activation::kTanh);
  return f;
}

Eigen::Index FeatureNet::parameter_count() const {
  return encoder.parameter_count() + trunk.parameter_count();
}

const Eigen::MatrixXd& FeatureNet::forward(const Eigen::MatrixXd& input, Cache& cache) const {
  if (input.rows() != input_size()) {
    throw std::invalid_argument("observation has " + std::to_string(input.rows()) +
                                " entries, network expects " + std::to_string(input_size()));
  }
  const Eigen::Index window = encoder.input_size();
  const Eigen::MatrixXd& encoded = encoder.forward(input.bottomRows(window), cache.encoder);
  Eigen::MatrixXd trunk_in(3 + encoded.rows(), input.cols());
  trunk_in << input.topRows(3), encoded;
  return trunk.forward(trunk_in, cache.trunk);
}

void FeatureNet::backward(const Cache& cache, const Eigen::MatrixXd& feature_grad,
                          FeatureNet& grad) const {
  const Eigen::MatrixXd trunk_in_grad = trunk.backward(cache.trunk, feature_grad, grad.trunk);
  const Eigen::MatrixXd encoded_grad = trunk_in_grad.bottomRows(trunk_in_grad.rows() - 3);
  encoder.backward(cache.encoder, encoded_grad, grad.encoder);
}

FeatureNet FeatureNet::zeros_like() const {
  return FeatureNet{encoder.zeros_like(), trunk.zeros_like()};
}

// ---------------------------------------------------------------------------
// GaussianPolicy

GaussianPolicy::GaussianPolicy(const NetworkShape& shape, double init_log_std)
    : body_(FeatureNet::make(shape.horizon, shape.encoder_width, shape.hidden_width)),
      head_({shape.hidden_width, 2}, nn::Activation::kIdentity, nn::Activation::kIdentity),
      normalizer_(observation_size(shape.horizon)) {
  set_log_std(Eigen::Vector2d::Constant(init_log_std));
}

Eigen::Index GaussianPolicy::parameter_count() const {
  return body_.parameter_count() + head_.parameter_count() + 2;
}

Eigen::VectorXd GaussianPolicy::parameters() const {
  Eigen::VectorXd out(parameter_count());
  Eigen::Index offset = 0;
  body_.encoder.flatten_into(out, offset);
  body_.trunk.flatten_into(out, offset);
  head_.flatten_into(out, offset);
  out.segment<2>(offset) = log_std_;
  return out;
}

void GaussianPolicy::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != parameter_count()) {
    throw std::invalid_argument("policy parameter vector has wrong length");
  }
  Eigen::Index offset = 0;
  body_.encoder.assign_from(params, offset);
  body_.trunk.assign_from(params, offset);
  head_.assign_from(params, offset);
  set_log_std(params.segment<2>(offset));
}

void GaussianPolicy::set_log_std(const Eigen::Vector2d& log_std) {
  log_std_ = log_std.cwiseMax(kMinLogStd).cwiseMin(kMaxLogStd);
}

Eigen::MatrixXd GaussianPolicy::mean(const Eigen::MatrixXd& normalized_obs) const {
  FeatureNet::Cache cache;
  return head_.forward(body_.forward(normalized_obs, cache));
}

Eigen::Vector2d GaussianPolicy::mean(const Observation& obs) const {
  return mean(Eigen::MatrixXd(normalizer_.normalize(obs.flatten()))).col(0);
}

Action GaussianPolicy::mean_action(const Observation& obs) const {
  const Eigen::Vector2d m = mean(obs);
  return Action(m[0], m[1]);
}

double gaussian_log_prob(const Eigen::Vector2d& x, const Eigen::Vector2d& mean,
                         const Eigen::Vector2d& log_std) {
  const Eigen::Array2d z = (x - mean).array() * (-log_std.array()).exp();
  return (-0.5 * z.square() - log_std.array() - 0.5 * kLog2Pi).sum();
}

PolicySample policy_sample(const GaussianPolicy& policy, const Observation& obs,
                           std::mt19937_64& rng) {
  const Eigen::Vector2d mean = policy.mean(obs);
  const Eigen::Vector2d std = policy.log_std().array().exp();
  std::normal_distribution<double> normal(0.0, 1.0);
  PolicySample sample;
  sample.raw[0] = mean[0] + std[0] * normal(rng);
  sample.raw[1] = mean[1] + std[1] * normal(rng);
  sample.action = Action(sample.raw[0], sample.raw[1]);
  sample.log_prob = gaussian_log_prob(sample.raw, mean, policy.log_std());
  return sample;
}

double policy_log_prob(const GaussianPolicy& policy, const Observation& obs,
                       const Eigen::Vector2d& raw_action) {
  return gaussian_log_prob(raw_action, policy.mean(obs), policy.log_std());
}

double policy_entropy(const GaussianPolicy& policy) {
  return policy.log_std().sum() + (1.0 + kLog2Pi);  // 2 * 0.5 * (1 + log 2pi)
}

LogProbPass policy_log_prob_forward(const GaussianPolicy& policy,
                                    const Eigen::MatrixXd& normalized_obs,
                                    const Eigen::MatrixXd& raw_actions) {
  if (raw_actions.rows() != 2 || raw_actions.cols() != normalized_obs.cols()) {
    throw std::invalid_argument("policy: action batch shape mismatch");
  }
  LogProbPass pass;
  const Eigen::MatrixXd& features = policy.body().forward(normalized_obs, pass.body);
  pass.mean = policy.mean_head().forward(features, pass.head);
  pass.actions = raw_actions;
  const Eigen::Array2d log_std = policy.log_std().array();
  const Eigen::Array2d inv_std = (-log_std).exp();
  const Eigen::ArrayXXd z = (raw_actions - pass.mean).array().colwise() * inv_std;
  pass.log_probs = (-0.5 * z.square()).colwise().sum().transpose().matrix();
  pass.log_probs.array() -= log_std.sum() + kLog2Pi;
  return pass;
}

Eigen::VectorXd policy_log_prob_backward(const GaussianPolicy& policy, const LogProbPass& pass,
                                         const Eigen::VectorXd& dloss_dlogp,
                                         const Eigen::Vector2d& dloss_dlogstd) {
  const Eigen::Array2d inv_var = (-2.0 * policy.log_std().array()).exp();
  const Eigen::ArrayXXd diff = (pass.actions - pass.mean).array();

  // d log p / d mean = (a - mean) / sigma^2
  Eigen::MatrixXd mean_grad = (diff.colwise() * inv_var).matrix();
  mean_grad.array().rowwise() *= dloss_dlogp.transpose().array();

  // d log p / d log_std = (a - mean)^2 / sigma^2 - 1
  const Eigen::MatrixXd dlogp_dlogstd = ((diff.square().colwise() * inv_var) - 1.0).matrix();
  const Eigen::Vector2d logstd_grad = dlogp_dlogstd * dloss_dlogp + dloss_dlogstd;

  FeatureNet body_grad = policy.body().zeros_like();
  nn::MlpD head_grad = policy.mean_head().zeros_like();
  const Eigen::MatrixXd feature_grad =
      policy.mean_head().backward(pass.head, mean_grad, head_grad);
  policy.body().backward(pass.body, feature_grad, body_grad);

  Eigen::VectorXd out(policy.parameter_count());
  Eigen::Index offset = 0;
  body_grad.encoder.flatten_into(out, offset);
  body_grad.trunk.flatten_into(out, offset);
  head_grad.flatten_into(out, offset);
  out.segment<2>(offset) = logstd_grad;
  return out;
}

// ---------------------------------------------------------------------------
// ValueNet

ValueNet::ValueNet(const NetworkShape& shape, double output_scale)
    : body_(FeatureNet::make(shape.horizon, shape.encoder_width, shape.hidden_width)),
      head_({shape.hidden_width, 1}, nn::Activation::kIdentity, nn::Activation::kIdentity),
      output_scale_(output_scale),
      normalizer_(observation_size(shape.horizon)) {
  if (!(output_scale > 0.0)) throw std::invalid_argument("value output scale must be > 0");
}

Eigen::Index ValueNet::parameter_count() const {
  return body_.parameter_count() + head_.parameter_count();
}

Eigen::VectorXd ValueNet::parameters() const {
  Eigen::VectorXd out(parameter_count());
  Eigen::Index offset = 0;
  body_.encoder.flatten_into(out, offset);
  body_.trunk.flatten_into(out, offset);
  head_.flatten_into(out, offset);
  return out;
}

void ValueNet::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != parameter_count()) {
    throw std::invalid_argument("value parameter vector has wrong length");
  }
  Eigen::Index offset = 0;
  body_.encoder.assign_from(params, offset);
  body_.trunk.assign_from(params, offset);
  head_.assign_from(params, offset);
}

Eigen::VectorXd ValueNet::values(const Eigen::MatrixXd& normalized_obs) const {
  return value_forward(*this, normalized_obs).values;
}

double value(const ValueNet& net, const Observation& obs) {
  const Eigen::MatrixXd x = net.normalizer().normalize(obs.flatten());
  return net.values(x)[0];
}

ValuePass value_forward(const ValueNet& net, const Eigen::MatrixXd& normalized_obs) {
  ValuePass pass;
  const Eigen::MatrixXd& features = net.body().forward(normalized_obs, pass.body);
  pass.values = net.head().forward(features, pass.head).row(0).transpose() * net.output_scale();
  return pass;
}

Eigen::VectorXd value_backward(const ValueNet& net, const ValuePass& pass,
                               const Eigen::VectorXd& dloss_dvalue) {
  FeatureNet body_grad = net.body().zeros_like();
  nn::MlpD head_grad = net.head().zeros_like();
  const Eigen::MatrixXd out_grad = (dloss_dvalue * net.output_scale()).transpose();
  const Eigen::MatrixXd feature_grad = net.head().backward(pass.head, out_grad, head_grad);
  net.body().backward(pass.body, feature_grad, body_grad);

  Eigen::VectorXd out(net.parameter_count());
  Eigen::Index offset = 0;
  body_grad.encoder.flatten_into(out, offset);
  body_grad.trunk.flatten_into(out, offset);
  head_grad.flatten_into(out, offset);
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kFormat = "wpr-checkpoint-1";

nlohmann::json describe(const std::string& name, const nn::MlpD& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"in", l.in_size()},
                      {"out", l.out_size()},
                      {"activation", std::string(nn::to_string(l.activation))}});
  }
  return {{"name", name}, {"layers", layers}};
}

nn::MlpD build(const nlohmann::json& desc, const std::string& expected_name) {
  if (desc.at("name").get<std::string>() != expected_name) {
    throw std::runtime_error("checkpoint: expected network '" + expected_name + "'");
  }
  std::vector<nn::DenseLayer<double>> layers;
  for (const auto& l : desc.at("layers")) {
    nn::DenseLayer<double> layer;
    const auto in = l.at("in").get<Eigen::Index>();
    const auto out = l.at("out").get<Eigen::Index>();
    layer.weight = Eigen::MatrixXd::Zero(out, in);
    layer.bias = Eigen::VectorXd::Zero(out);
    layer.activation = nn::activation_from_string(l.at("activation").get<std::string>());
    layers.push_back(std::move(layer));
  }
  return nn::MlpD(std::move(layers));
}

nlohmann::json normalizer_json(const ObservationNormalizer& n) {
  return {{"mean", std::vector<double>(n.mean().begin(), n.mean().end())},
          {"var", std::vector<double>(n.var().begin(), n.var().end())},
          {"count", n.count()}};
}

ObservationNormalizer normalizer_from_json(const nlohmann::json& j) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto var = j.at("var").get<std::vector<double>>();
  ObservationNormalizer n(static_cast<Eigen::Index>(mean.size()));
  n.set_state(Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size())),
              Eigen::Map<const Eigen::VectorXd>(var.data(), static_cast<Eigen::Index>(var.size())),
              j.at("count").get<double>());
  return n;
}

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  p.replace_extension(".bin");
  return p;
}

void write_blob(const std::filesystem::path& path, const Eigen::VectorXd& params) {
  auto out = open_output(path);
  for (double v : params) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char bytes[8];
    std::memcpy(bytes, &bits, 8);
    out.write(bytes, 8);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Eigen::VectorXd read_blob(const std::filesystem::path& path, Eigen::Index count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Eigen::VectorXd params(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    char bytes[8];
    if (!in.read(bytes, 8)) throw std::runtime_error("checkpoint blob is truncated");
    std::uint64_t bits = 0;
    std::memcpy(&bits, bytes, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    params[i] = std::bit_cast<double>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error("checkpoint blob has trailing bytes");
  }
  return params;
}

nlohmann::json read_manifest(const std::filesystem::path& path, const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.at("format").get<std::string>() != kFormat) {
    throw std::runtime_error("unsupported checkpoint format in " + path.string());
  }
  if (j.at("kind").get<std::string>() != kind) {
    throw std::runtime_error(path.string() + " is not a " + kind + " checkpoint");
  }
  return j;
}

void write_manifest(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

}  // namespace

void save_policy(const GaussianPolicy& policy, const std::filesystem::path& path) {
  const auto blob = blob_path(path);
  nlohmann::json j;
  j["format"] = kFormat;
  j["kind"] = "policy";
  j["horizon"] = policy.horizon();
  j["networks"] = {describe("encoder", policy.body().encoder),
                   describe("trunk", policy.body().trunk),
                   describe("mean_head", policy.mean_head())};
  j["log_std_size"] = 2;
  j["normalizer"] = normalizer_json(policy.normalizer());
  j["parameter_count"] = policy.parameter_count();
  j["blob"] = blob.filename().string();
  write_manifest(path, j);
  write_blob(blob, policy.parameters());
}

GaussianPolicy load_policy(const std::filesystem::path& path) {
  const auto j = read_manifest(path, "policy");
  const auto& nets = j.at("networks");
  GaussianPolicy policy;
  policy.body().encoder = build(nets.at(0), "encoder");
  policy.body().trunk = build(nets.at(1), "trunk");
  policy.mean_head() = build(nets.at(2), "mean_head");
  if (policy.horizon() != j.at("horizon").get<int>()) {
    throw std::runtime_error("checkpoint horizon does not match encoder shape");
  }
  policy.normalizer() = normalizer_from_json(j.at("normalizer"));
  const auto count = j.at("parameter_count").get<Eigen::Index>();
  if (count != policy.parameter_count()) throw std::runtime_error("parameter count mismatch");
  policy.set_parameters(read_blob(path.parent_path() / j.at("blob").get<std::string>(), count));
  return policy;
}

void save_value(const ValueNet& net, const std::filesystem::path& path) {
  const auto blob = blob_path(path);
  nlohmann::json j;
  j["format"] = kFormat;
  j["kind"] = "value";
  j["horizon"] = net.horizon();
  j["networks"] = {describe("encoder", net.body().encoder), describe("trunk", net.body().trunk),
                   describe("value_head", net.head())};
  j["output_scale"] = net.output_scale();
  j["normalizer"] = normalizer_json(net.normalizer());
  j["parameter_count"] = net.parameter_count();
  j["blob"] = blob.filename().string();
  write_manifest(path, j);
  write_blob(blob, net.parameters());
}

ValueNet load_value(const std::filesystem::path& path) {
  const auto j = read_manifest(path, "value");
  const auto& nets = j.at("networks");
  NetworkShape shape;
  shape.horizon = j.at("horizon").get<int>();
  ValueNet net(shape, j.at("output_scale").get<double>());
  net.body().encoder = build(nets.at(0), "encoder");
  net.body().trunk = build(nets.at(1), "trunk");
  net.head() = build(nets.at(2), "value_head");
  if (net.horizon() != shape.horizon) {
    throw std::runtime_error("checkpoint horizon does not match encoder shape");
  }
  net.normalizer() = normalizer_from_json(j.at("normalizer"));
  const auto count = j.at("parameter_count").get<Eigen::Index>();
  if (count != net.parameter_count()) throw std::runtime_error("parameter count mismatch");
  net.set_parameters(read_blob(path.parent_path() / j.at("blob").get<std::string>(), count));
  return net;
}

}  // namespace wpr
