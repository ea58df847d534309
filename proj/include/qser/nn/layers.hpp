#pragma once

// Stateful layer objects used by the model. A layer caches what its backward
// pass needs during forward, so one instance handles one example at a time.
// Parametric layers keep weights and bias in one flat buffer, weights first.

#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "qser/nn/ops.hpp"
#include "qser/nn/tensor.hpp"
#include "qser/rng.hpp"

namespace qser {

class Layer {
 public:
  virtual ~Layer() = default;

  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor forward(const Tensor& x) = 0;
  /// Adds parameter gradients into grads(); returns d loss / d input when
  /// want_input_grad is set, otherwise an empty tensor.
  virtual Tensor backward(const Tensor& grad_out, bool want_input_grad) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  virtual std::span<double> params() { return {}; }
  virtual std::span<const double> params() const { return {}; }
  virtual std::span<double> grads() { return {}; }
  virtual void init_params(Rng&) {}

  std::size_t param_count() const { return params().size(); }
  void zero_grads() {
    for (auto& g : grads()) g = 0.0;
  }
};

/// Uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)].
inline void fan_in_uniform(std::span<double> values, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (auto& v : values) v = rng.uniform(-bound, bound);
}

/// Shared storage for layers with a weight block followed by a bias block.
class ParamLayer : public Layer {
 public:
  std::span<double> params() override { return params_; }
  std::span<const double> params() const override { return params_; }
  std::span<double> grads() override { return grads_; }

  std::span<const double> weights() const { return {params_.data(), n_weights_}; }
  std::span<const double> bias() const {
    return {params_.data() + n_weights_, params_.size() - n_weights_};
  }
  std::span<double> weights() { return {params_.data(), n_weights_}; }
  std::span<double> bias() { return {params_.data() + n_weights_, params_.size() - n_weights_}; }

 protected:
  ParamLayer(std::size_t n_weights, std::size_t n_bias)
      : n_weights_(n_weights), params_(n_weights + n_bias, 0.0), grads_(n_weights + n_bias, 0.0) {}

  std::span<double> grad_weights() { return {grads_.data(), n_weights_}; }
  std::span<double> grad_bias() { return {grads_.data() + n_weights_, grads_.size() - n_weights_}; }

  std::size_t n_weights_;
  std::vector<double> params_;
  std::vector<double> grads_;
};

class Conv2DLayer final : public ParamLayer {
 public:
  Conv2DLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
              std::size_t stride = 1)
      : ParamLayer(out_channels * in_channels * kernel * kernel, out_channels),
        in_(in_channels), out_(out_channels), k_(kernel), stride_(stride) {
    detail::require(in_ >= 1 && out_ >= 1 && k_ >= 1 && stride_ >= 1,
                    "conv2d channels, kernel and stride must be >= 1");
  }

  Shape output_shape(const Shape& in) const override {
    detail::require(in.size() == 3 && in[0] == in_,
                    "conv2d expects [" + std::to_string(in_) + ", H, W], got " + shape_string(in));
    return {out_, conv_out_dim(in[1], k_, stride_), conv_out_dim(in[2], k_, stride_)};
  }

  Tensor forward(const Tensor& x) override {
    output_shape(x.shape());
    input_ = x;
    return conv2d(x, weights(), out_, k_, bias(), stride_);
  }

  Tensor backward(const Tensor& g, bool want_input_grad) override {
    return conv2d_backward_into(input_, weights(), out_, k_, g, stride_, grad_weights(),
                                grad_bias(), want_input_grad);
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2DLayer>(*this); }

  void init_params(Rng& rng) override { fan_in_uniform(params_, in_ * k_ * k_, rng); }

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  std::size_t kernel() const { return k_; }
  std::size_t stride() const { return stride_; }

 private:
  std::size_t in_, out_, k_, stride_;
  Tensor input_;
};

class DenseLayer final : public ParamLayer {
 public:
  DenseLayer(std::size_t in, std::size_t out) : ParamLayer(in * out, out), in_(in), out_(out) {
    detail::require(in_ >= 1 && out_ >= 1, "dense widths must be >= 1");
  }

  Shape output_shape(const Shape& in) const override {
    detail::require(shape_size(in) == in_ && in.size() == 1,
                    "dense expects [" + std::to_string(in_) + "], got " + shape_string(in));
    return {out_};
  }

  Tensor forward(const Tensor& x) override {
    output_shape(x.shape());
    input_ = x;
    return dense(x, weights(), out_, bias());
  }

  Tensor backward(const Tensor& g, bool want_input_grad) override {
    return dense_backward_into(input_, weights(), g, grad_weights(), grad_bias(), want_input_grad);
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }

  void init_params(Rng& rng) override { fan_in_uniform(params_, in_, rng); }

  std::size_t in_width() const { return in_; }
  std::size_t out_width() const { return out_; }

 private:
  std::size_t in_, out_;
  Tensor input_;
};

class ReLULayer final : public Layer {
 public:
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x) override {
    input_ = x;
    return relu(x);
  }
  Tensor backward(const Tensor& g, bool want_input_grad) override {
    return want_input_grad ? relu_backward(input_, g) : Tensor();
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReLULayer>(*this); }

 private:
  Tensor input_;
};

class MaxPool2DLayer final : public Layer {
 public:
  MaxPool2DLayer(std::size_t kernel, std::size_t stride) : k_(kernel), stride_(stride) {
    detail::require(k_ >= 1 && stride_ >= 1, "maxpool kernel and stride must be >= 1");
  }

  Shape output_shape(const Shape& in) const override {
    detail::require(in.size() == 3, "maxpool2d expects [C, H, W], got " + shape_string(in));
    return {in[0], conv_out_dim(in[1], k_, stride_), conv_out_dim(in[2], k_, stride_)};
  }

  Tensor forward(const Tensor& x) override {
    auto r = maxpool2d(x, k_, stride_);
    in_shape_ = x.shape();
    argmax_ = std::move(r.argmax);
    return std::move(r.output);
  }

  Tensor backward(const Tensor& g, bool want_input_grad) override {
    return want_input_grad ? maxpool2d_backward(in_shape_, argmax_, g) : Tensor();
  }

  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool2DLayer>(*this); }

  std::size_t kernel() const { return k_; }
  std::size_t stride() const { return stride_; }

 private:
  std::size_t k_, stride_;
  Shape in_shape_;
  std::vector<std::size_t> argmax_;
};

class FlattenLayer final : public Layer {
 public:
  Shape output_shape(const Shape& in) const override { return {shape_size(in)}; }
  Tensor forward(const Tensor& x) override {
    in_shape_ = x.shape();
    return flatten(x);
  }
  Tensor backward(const Tensor& g, bool want_input_grad) override {
    return want_input_grad ? g.reshaped(in_shape_) : Tensor();
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<FlattenLayer>(*this); }

 private:
  Shape in_shape_;
};

/// scale * sigmoid(x): squashes adaptor outputs into rotation angles.
class RangeMapLayer final : public Layer {
 public:
  explicit RangeMapLayer(double scale = std::numbers::pi) : scale_(scale) {}
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x) override {
    input_ = x;
    return sigmoid_scaled(x, scale_);
  }
  Tensor backward(const Tensor& g, bool want_input_grad) override {
    return want_input_grad ? sigmoid_scaled_backward(input_, g, scale_) : Tensor();
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<RangeMapLayer>(*this); }
  double scale() const { return scale_; }

 private:
  double scale_;
  Tensor input_;
};

class SoftmaxLayer final : public Layer {
 public:
  Shape output_shape(const Shape& in) const override {
    detail::require(in.size() == 1, "softmax expects a vector, got " + shape_string(in));
    return in;
  }
  Tensor forward(const Tensor& x) override {
    output_ = softmax(x);
    return output_;
  }
  // dL/dx_i = p_i (g_i - sum_j g_j p_j)
  Tensor backward(const Tensor& g, bool want_input_grad) override {
    if (!want_input_grad) return Tensor();
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * output_[i];
    Tensor out(output_.shape());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = output_[i] * (g[i] - s);
    return out;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<SoftmaxLayer>(*this); }

 private:
  Tensor output_;
};

}  // namespace qser
