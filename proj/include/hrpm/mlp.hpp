#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "hrpm/errors.hpp"
#include "hrpm/random.hpp"
#include "hrpm/simplex.hpp"

namespace hrpm {

enum class Activation { Identity, Relu };

/// Per-parameter partial derivatives of a scalar loss, shaped like the net.
template <typename Scalar>
struct MlpGradient {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;

  MlpGradient& operator+=(const MlpGradient& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += other.weights[l];
      biases[l] += other.biases[l];
    }
    return *this;
  }

  MlpGradient& operator*=(Scalar s) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] *= s;
      biases[l] *= s;
    }
    return *this;
  }

  bool all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
    }
    return true;
  }

  Scalar squared_norm() const {
    Scalar s(0);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      s += weights[l].squaredNorm() + biases[l].squaredNorm();
    }
    return s;
  }
};

/// Fully connected feed-forward net: rectifier hidden layers, identity output.
/// Inputs are column vectors; batches are matrices with one sample per column.
template <typename Scalar>
class BasicMlp {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;
  using Gradient = MlpGradient<Scalar>;

  struct Layer {
    Matrix weight;
    Vector bias;
    Activation activation = Activation::Identity;
  };

  BasicMlp() = default;

  /// Zero-initialized net with the given layer sizes (input first, output last).
  explicit BasicMlp(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw ShapeError("an mlp needs at least input and output sizes");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      if (sizes[l] < 1 || sizes[l + 1] < 1) throw ShapeError("layer sizes must be positive");
      const bool last = l + 2 == sizes.size();
      layers_.push_back({Matrix::Zero(sizes[l + 1], sizes[l]), Vector::Zero(sizes[l + 1]),
                         last ? Activation::Identity : Activation::Relu});
    }
  }

  explicit BasicMlp(std::vector<Layer> layers) : layers_(std::move(layers)) { check_shapes(); }

  /// He-scaled normal weights for rectifier layers, zero biases; the output layer is
  /// further scaled by `output_scale`.
  static BasicMlp random(const std::vector<int>& sizes, Rng& rng, Scalar output_scale = Scalar(1)) {
    BasicMlp net(sizes);
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
      auto& w = net.layers_[l].weight;
      const double fan_in = static_cast<double>(w.cols());
      double scale = std::sqrt(2.0 / fan_in);
      if (l + 1 == net.layers_.size()) scale = std::sqrt(1.0 / fan_in) * static_cast<double>(output_scale);
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = Scalar(scale * rng.normal());
      }
    }
    return net;
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Eigen::Index input_size() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
  Eigen::Index output_size() const { return layers_.empty() ? 0 : layers_.back().weight.rows(); }

  std::vector<int> sizes() const {
    std::vector<int> s;
    if (layers_.empty()) return s;
    s.push_back(static_cast<int>(input_size()));
    for (const auto& l : layers_) s.push_back(static_cast<int>(l.weight.rows()));
    return s;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  template <typename Derived>
  Matrix forward(const Eigen::MatrixBase<Derived>& inputs) const {
    check_input(inputs.rows());
    Matrix a = inputs;
    for (const auto& layer : layers_) {
      Matrix z = (layer.weight * a).colwise() + layer.bias;
      a = activate(z, layer.activation);
    }
    return a;
  }

  /// Forward pass that keeps the activations needed by backward().
  template <typename Derived>
  Matrix forward_train(const Eigen::MatrixBase<Derived>& inputs) {
    check_input(inputs.rows());
    cache_.emplace();
    cache_->activations.clear();
    cache_->activations.push_back(inputs);
    for (const auto& layer : layers_) {
      Matrix z = (layer.weight * cache_->activations.back()).colwise() + layer.bias;
      cache_->activations.push_back(activate(z, layer.activation));
    }
    return cache_->activations.back();
  }

  /// Exact gradients of a scalar loss given dL/d(output) for the cached batch.
  Gradient backward(const Matrix& output_grad) const {
    if (!cache_) throw LifecycleError("backward() without a cached forward_train()");
    const auto& acts = cache_->activations;
    if (output_grad.rows() != output_size() || output_grad.cols() != acts.back().cols()) {
      throw ShapeError("backward: output gradient shape mismatch");
    }
    Gradient g;
    g.weights.resize(layers_.size());
    g.biases.resize(layers_.size());
    Matrix delta = output_grad;
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& layer = layers_[li];
      if (layer.activation == Activation::Relu) {
        delta = delta.cwiseProduct((acts[li + 1].array() > Scalar(0)).template cast<Scalar>().matrix());
      }
      g.weights[li] = delta * acts[li].transpose();
      g.biases[li] = delta.rowwise().sum();
      if (li > 0) delta = layer.weight.transpose() * delta;
    }
    return g;
  }

  Gradient zero_gradient() const {
    Gradient g;
    for (const auto& l : layers_) {
      g.weights.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
      g.biases.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
  }

  /// All parameters flattened layer by layer: weight row-major, then bias.
  Vector parameters() const {
    Vector p(parameter_count());
    Eigen::Index k = 0;
    for (const auto& l : layers_) {
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
        for (Eigen::Index j = 0; j < l.weight.cols(); ++j) p(k++) = l.weight(i, j);
      }
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) p(k++) = l.bias(i);
    }
    return p;
  }

  void set_parameters(const Vector& p) {
    if (p.size() != parameter_count()) throw ShapeError("set_parameters: size mismatch");
    Eigen::Index k = 0;
    for (auto& l : layers_) {
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
        for (Eigen::Index j = 0; j < l.weight.cols(); ++j) l.weight(i, j) = p(k++);
      }
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = p(k++);
    }
  }

  bool all_finite() const {
    for (const auto& l : layers_) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  template <typename To>
  BasicMlp<To> cast() const {
    std::vector<typename BasicMlp<To>::Layer> out;
    for (const auto& l : layers_) {
      out.push_back({l.weight.template cast<To>(), l.bias.template cast<To>(), l.activation});
    }
    return BasicMlp<To>(std::move(out));
  }

  /// Frozen copy without the training cache.
  BasicMlp frozen() const {
    BasicMlp copy;
    copy.layers_ = layers_;
    return copy;
  }

 private:
  struct Cache {
    std::vector<Matrix> activations;
  };

  static Matrix activate(Matrix z, Activation a) {
    if (a == Activation::Relu) z = z.cwiseMax(Scalar(0));
    return z;
  }

  void check_input(Eigen::Index rows) const {
    if (layers_.empty()) throw ShapeError("forward on an empty net");
    if (rows != input_size()) throw ShapeError("forward: input size mismatch");
  }

  void check_shapes() const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].bias.size() != layers_[l].weight.rows()) throw ShapeError("bias size mismatch");
      if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows()) {
        throw ShapeError("consecutive layer sizes incompatible");
      }
    }
  }

  std::vector<Layer> layers_;
  std::optional<Cache> cache_;
};

using Mlp = BasicMlp<double>;
using Gradient = MlpGradient<double>;

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer bound to one net's shape. Minimizes: parameters move
/// against the gradient.
template <typename Scalar>
class BasicAdam {
 public:
  BasicAdam() = default;
  BasicAdam(const BasicMlp<Scalar>& net, AdamConfig config)
      : config_(config), m_(net.zero_gradient()), v_(net.zero_gradient()) {}

  void step(BasicMlp<Scalar>& net, const MlpGradient<Scalar>& g) {
    ++steps_;
    const Scalar b1 = Scalar(config_.beta1);
    const Scalar b2 = Scalar(config_.beta2);
    const Scalar c1 = Scalar(1) - Scalar(std::pow(config_.beta1, static_cast<double>(steps_)));
    const Scalar c2 = Scalar(1) - Scalar(std::pow(config_.beta2, static_cast<double>(steps_)));
    const Scalar lr = Scalar(config_.learning_rate);
    const Scalar eps = Scalar(config_.epsilon);
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = b1 * m + (Scalar(1) - b1) * grad;
      v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      update(layers[l].weight, m_.weights[l], v_.weights[l], g.weights[l]);
      update(layers[l].bias, m_.biases[l], v_.biases[l], g.biases[l]);
    }
  }

  long steps() const { return steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  MlpGradient<Scalar> m_;
  MlpGradient<Scalar> v_;
  long steps_ = 0;
};

using Adam = BasicAdam<double>;

/// Loss used by the gradient checker: sum over samples of c.f + 0.5 |f|^2 with
/// fixed output weights c_o = 1 + o / n_out. Returns the value and dL/df.
template <typename Scalar>
std::pair<Scalar, MatrixX<Scalar>> probe_loss(const MatrixX<Scalar>& outputs) {
  MatrixX<Scalar> grad = outputs;
  Scalar loss(0);
  const Eigen::Index n = outputs.rows();
  for (Eigen::Index j = 0; j < outputs.cols(); ++j) {
    for (Eigen::Index o = 0; o < n; ++o) {
      const Scalar c = Scalar(1) + Scalar(o) / Scalar(n);
      loss += c * outputs(o, j) + Scalar(0.5) * outputs(o, j) * outputs(o, j);
      grad(o, j) = c + outputs(o, j);
    }
  }
  return {loss, grad};
}

/// Largest relative disagreement between `analytic` and central differences of the
/// probe loss, over every parameter. The differences are taken in extended precision
/// so that rounding in the loss does not swamp small partials.
template <typename Scalar>
double gradient_error(const BasicMlp<Scalar>& net, const MatrixX<Scalar>& inputs,
                      const MlpGradient<Scalar>& analytic, double step = 1e-6) {
  if (net.parameter_count() == 0) return 0.0;
  using Wide = long double;
  BasicMlp<Wide> probe = net.template cast<Wide>();
  const MatrixX<Wide> x = inputs.template cast<Wide>();
  VectorX<Wide> params = probe.parameters();
  BasicMlp<Scalar> shaped = net.frozen();
  auto& layers = shaped.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight = analytic.weights[l];
    layers[l].bias = analytic.biases[l];
  }
  const VectorX<Scalar> flat = shaped.parameters();
  double worst = 0.0;
  for (Eigen::Index k = 0; k < params.size(); ++k) {
    const Wide saved = params(k);
    params(k) = saved + Wide(step);
    probe.set_parameters(params);
    const Wide up = probe_loss<Wide>(probe.forward(x)).first;
    params(k) = saved - Wide(step);
    probe.set_parameters(params);
    const Wide down = probe_loss<Wide>(probe.forward(x)).first;
    params(k) = saved;
    const double numeric = static_cast<double>((up - down) / (Wide(2) * Wide(step)));
    const double exact = static_cast<double>(flat(k));
    const double denom = std::max(std::abs(numeric), std::abs(exact));
    if (denom > 0.0) worst = std::max(worst, std::abs(numeric - exact) / denom);
  }
  return worst;
}

/// Checks backward() against central differences on `inputs`.
template <typename Scalar>
double grad_check(const BasicMlp<Scalar>& net, const MatrixX<Scalar>& inputs, double step = 1e-6) {
  if (net.parameter_count() == 0) return 0.0;
  BasicMlp<Scalar> work = net.frozen();
  const auto [loss, dout] = probe_loss<Scalar>(work.forward_train(inputs));
  (void)loss;
  return gradient_error(net, inputs, work.backward(dout), step);
}

}  // namespace hrpm
