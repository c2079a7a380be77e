#ifndef WPR_MLP_HPP_
#define WPR_MLP_HPP_

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace wpr::nn {

enum class Activation { kTanh, kIdentity };

inline std::string_view to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "identity";
}

inline Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

template <typename Scalar>
struct DenseLayer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::kIdentity;

  Eigen::Index in_size() const { return weight.cols(); }
  Eigen::Index out_size() const { return weight.rows(); }
};

/// Activations of every layer for one batched forward pass. outputs[0] is the
/// input batch, outputs[i + 1] the post-activation output of layer i.
template <typename Scalar>
struct ForwardCache {
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> outputs;
};

/// Feed-forward stack of dense layers. Batches are column-major: one sample
/// per column.
template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Mlp() = default;

  /// Zero-initialized network with layer widths `sizes` (input first).
  Mlp(const std::vector<Eigen::Index>& sizes, Activation hidden, Activation output) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least two sizes");
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      DenseLayer<Scalar> layer;
      layer.weight = Matrix::Zero(sizes[i + 1], sizes[i]);
      layer.bias = Vector::Zero(sizes[i + 1]);
      layer.activation = (i + 2 == sizes.size()) ? output : hidden;
      layers_.push_back(std::move(layer));
    }
  }

  explicit Mlp(std::vector<DenseLayer<Scalar>> layers) : layers_(std::move(layers)) {
    validate();
  }

  /// Gaussian weights with std gain / sqrt(fan_in) for hidden layers and
  /// `output_gain` / sqrt(fan_in) for the last layer; zero biases.
  template <typename Rng>
  void randomize(Rng& rng, Scalar gain, Scalar output_gain) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto& layer = layers_[l];
      const Scalar g = (l + 1 == layers_.size()) ? output_gain : gain;
      const Scalar scale = g / std::sqrt(static_cast<Scalar>(layer.in_size()));
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
          layer.weight(r, c) = scale * static_cast<Scalar>(normal(rng));
        }
      }
      layer.bias.setZero();
    }
  }

  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
  std::vector<DenseLayer<Scalar>>& layers() { return layers_; }

  Eigen::Index input_size() const { return layers_.front().in_size(); }
  Eigen::Index output_size() const { return layers_.back().out_size(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  void validate() const {
    if (layers_.empty()) throw std::invalid_argument("Mlp has no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.size() != l.out_size()) throw std::invalid_argument("Mlp bias size mismatch");
      if (i > 0 && l.in_size() != layers_[i - 1].out_size()) {
        throw std::invalid_argument("Mlp adjacent layer sizes incompatible");
      }
      if (!l.weight.allFinite() || !l.bias.allFinite()) {
        throw std::invalid_argument("Mlp has non-finite parameters");
      }
    }
  }

  Matrix forward(const Matrix& input) const {
    ForwardCache<Scalar> cache;
    forward(input, cache);
    return std::move(cache.outputs.back());
  }

  const Matrix& forward(const Matrix& input, ForwardCache<Scalar>& cache) const {
    if (input.rows() != input_size()) {
      throw std::invalid_argument("Mlp input has " + std::to_string(input.rows()) +
                                  " rows, expected " + std::to_string(input_size()));
    }
    cache.outputs.resize(layers_.size() + 1);
    cache.outputs[0] = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      Matrix z = l.weight * cache.outputs[i];
      z.colwise() += l.bias;
      if (l.activation == Activation::kTanh) z = z.array().tanh().matrix();
      cache.outputs[i + 1] = std::move(z);
    }
    return cache.outputs.back();
  }

  /// Reverse pass for a cached forward. Parameter gradients are added into
  /// `grad` (same shape as this network); returns the input gradient.
  Matrix backward(const ForwardCache<Scalar>& cache, const Matrix& output_grad,
                  Mlp& grad) const {
    if (cache.outputs.size() != layers_.size() + 1) {
      throw std::invalid_argument("Mlp backward: cache does not match network");
    }
    if (output_grad.rows() != output_size() ||
        output_grad.cols() != cache.outputs.back().cols()) {
      throw std::invalid_argument("Mlp backward: output gradient shape mismatch");
    }
    Matrix delta = output_grad;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& l = layers_[k];
      if (l.activation == Activation::kTanh) {
        delta.array() *= (Scalar(1) - cache.outputs[k + 1].array().square());
      }
      grad.layers_[k].weight.noalias() += delta * cache.outputs[k].transpose();
      grad.layers_[k].bias += delta.rowwise().sum();
      delta = l.weight.transpose() * delta;
    }
    return delta;
  }

  /// Same architecture with every parameter set to zero.
  Mlp zeros_like() const {
    Mlp z = *this;
    for (auto& l : z.layers_) {
      l.weight.setZero();
      l.bias.setZero();
    }
    return z;
  }

  /// Parameters in layer order, each layer as column-major weight then bias.
  void flatten_into(Vector& out, Eigen::Index& offset) const {
    for (const auto& l : layers_) {
      out.segment(offset, l.weight.size()) = l.weight.reshaped();
      offset += l.weight.size();
      out.segment(offset, l.bias.size()) = l.bias;
      offset += l.bias.size();
    }
  }

  void assign_from(const Vector& in, Eigen::Index& offset) {
    for (auto& l : layers_) {
      l.weight.reshaped() = in.segment(offset, l.weight.size());
      offset += l.weight.size();
      l.bias = in.segment(offset, l.bias.size());
      offset += l.bias.size();
    }
  }

  Vector flatten() const {
    Vector out(parameter_count());
    Eigen::Index offset = 0;
    flatten_into(out, offset);
    return out;
  }

 private:
  std::vector<DenseLayer<Scalar>> layers_;
};

template <typename Scalar>
struct MlpGradients {
  Mlp<Scalar> params;
  typename Mlp<Scalar>::Matrix input;
};

template <typename Scalar>
typename Mlp<Scalar>::Matrix forward(const Mlp<Scalar>& net,
                                     const typename Mlp<Scalar>::Matrix& input) {
  return net.forward(input);
}

/// Exact reverse-mode gradients of sum(output_grad .* forward(input)).
template <typename Scalar>
MlpGradients<Scalar> backward(const Mlp<Scalar>& net, const typename Mlp<Scalar>::Matrix& input,
                              const typename Mlp<Scalar>::Matrix& output_grad) {
  ForwardCache<Scalar> cache;
  net.forward(input, cache);
  MlpGradients<Scalar> g;
  g.params = net.zeros_like();
  g.input = net.backward(cache, output_grad, g.params);
  return g;
}

using MlpD = Mlp<double>;

}  // namespace wpr::nn

#endif  // WPR_MLP_HPP_
