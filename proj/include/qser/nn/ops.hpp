#pragma once

// Single-example forward/backward kernels. Images are [C, H, W]; conv weights
// are [O, C, K, K]; dense weights are [out, in]. Every reduction runs in a
// fixed order, so results are reproducible run to run.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "qser/error.hpp"
#include "qser/nn/tensor.hpp"

namespace qser {

namespace detail {

inline double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
#pragma omp simd reduction(+ : acc)
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ModelError(message);
}

}  // namespace detail

inline std::size_t conv_out_dim(std::size_t in, std::size_t kernel, std::size_t stride) {
  detail::require(stride >= 1, "stride must be >= 1");
  detail::require(in >= kernel, "input extent " + std::to_string(in) + " smaller than kernel " +
                                    std::to_string(kernel));
  return (in - kernel) / stride + 1;
}

inline void check_conv_shapes(const Shape& in, const Shape& w, std::size_t bias_size) {
  detail::require(in.size() == 3, "conv2d input must be [C, H, W], got " + shape_string(in));
  detail::require(w.size() == 4 && w[2] == w[3], "conv2d weights must be [O, C, K, K]");
  detail::require(w[1] == in[0], "conv2d channel mismatch: input " + std::to_string(in[0]) +
                                     ", weights " + std::to_string(w[1]));
  detail::require(bias_size == w[0], "conv2d bias length must equal output channels");
}

/// Valid (unpadded) cross-correlation plus bias. weights is [O, C, K, K]
/// flattened.
inline Tensor conv2d(const Tensor& input, std::span<const double> weights, std::size_t O,
                     std::size_t K, std::span<const double> bias, std::size_t stride = 1) {
  check_conv_shapes(input.shape(), {O, input.rank() == 3 ? input.dim(0) : 0, K, K}, bias.size());
  detail::require(weights.size() == O * input.dim(0) * K * K, "conv2d weight count mismatch");
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t Ho = conv_out_dim(H, K, stride), Wo = conv_out_dim(W, K, stride);
  Tensor out({O, Ho, Wo});
  const double* in = input.data().data();
  const double* w = weights.data();
  double* dst = out.data().data();
  for (std::size_t o = 0; o < O; ++o) {
    double* plane = dst + o * Ho * Wo;
    std::fill(plane, plane + Ho * Wo, bias[o]);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t kh = 0; kh < K; ++kh) {
        for (std::size_t kw = 0; kw < K; ++kw) {
          const double wv = w[((o * C + c) * K + kh) * K + kw];
          for (std::size_t y = 0; y < Ho; ++y) {
            const double* src = in + (c * H + y * stride + kh) * W + kw;
            double* row = plane + y * Wo;
            if (stride == 1) {
              detail::axpy(wv, src, row, Wo);
            } else {
              for (std::size_t x = 0; x < Wo; ++x) row[x] += wv * src[x * stride];
            }
          }
        }
      }
    }
  }
  return out;
}

inline Tensor conv2d(const Tensor& input, const Tensor& weights, std::span<const double> bias,
                     std::size_t stride = 1) {
  check_conv_shapes(input.shape(), weights.shape(), bias.size());
  return conv2d(input, weights.data(), weights.dim(0), weights.dim(2), bias, stride);
}

struct Conv2DGrads {
  Tensor input;
  Tensor weights;
  std::vector<double> bias;
};

/// Accumulates weight/bias gradients into grad_w/grad_b (which must be sized
/// like the parameters) and returns the input gradient when requested.
inline Tensor conv2d_backward_into(const Tensor& input, std::span<const double> weights,
                                   std::size_t O, std::size_t K, const Tensor& grad_out,
                                   std::size_t stride, std::span<double> grad_w,
                                   std::span<double> grad_b, bool want_input_grad) {
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t Ho = grad_out.dim(1), Wo = grad_out.dim(2);
  detail::require(grad_out.rank() == 3 && grad_out.dim(0) == O &&
                      Ho == conv_out_dim(H, K, stride) && Wo == conv_out_dim(W, K, stride),
                  "conv2d backward: gradient shape mismatch");
  const double* in = input.data().data();
  const double* w = weights.data();
  const double* g = grad_out.data().data();
  Tensor grad_in;
  if (want_input_grad) grad_in = Tensor({C, H, W});
  double* gin = want_input_grad ? grad_in.data().data() : nullptr;

  for (std::size_t o = 0; o < O; ++o) {
    const double* gplane = g + o * Ho * Wo;
    double bsum = 0.0;
    for (std::size_t i = 0; i < Ho * Wo; ++i) bsum += gplane[i];
    grad_b[o] += bsum;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t kh = 0; kh < K; ++kh) {
        for (std::size_t kw = 0; kw < K; ++kw) {
          const std::size_t widx = ((o * C + c) * K + kh) * K + kw;
          double acc = 0.0;
          for (std::size_t y = 0; y < Ho; ++y) {
            const double* src = in + (c * H + y * stride + kh) * W + kw;
            const double* grow = gplane + y * Wo;
            if (stride == 1) {
              acc += detail::dot(src, grow, Wo);
            } else {
              for (std::size_t x = 0; x < Wo; ++x) acc += src[x * stride] * grow[x];
            }
          }
          grad_w[widx] += acc;
          if (gin) {
            const double wv = w[widx];
            for (std::size_t y = 0; y < Ho; ++y) {
              double* dst = gin + (c * H + y * stride + kh) * W + kw;
              const double* grow = gplane + y * Wo;
              if (stride == 1) {
                detail::axpy(wv, grow, dst, Wo);
              } else {
                for (std::size_t x = 0; x < Wo; ++x) dst[x * stride] += wv * grow[x];
              }
            }
          }
        }
      }
    }
  }
  return grad_in;
}

inline Conv2DGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                                   const Tensor& grad_out, std::size_t stride = 1) {
  Conv2DGrads grads{Tensor(), Tensor(weights.shape()), std::vector<double>(weights.dim(0), 0.0)};
  grads.input = conv2d_backward_into(input, weights.data(), weights.dim(0), weights.dim(2),
                                     grad_out, stride, grads.weights.data(), grads.bias, true);
  return grads;
}

/// y = W x + b, W is [out, in] flattened.
inline Tensor dense(const Tensor& input, std::span<const double> weights, std::size_t M,
                    std::span<const double> bias) {
  const std::size_t N = input.size();
  detail::require(weights.size() == M * N, "dense expects " + std::to_string(M ? weights.size() / M : 0) +
                                               " inputs, got " + std::to_string(N));
  detail::require(bias.size() == M, "dense bias length must equal output width");
  Tensor out({M});
  const double* w = weights.data();
  const double* x = input.data().data();
  for (std::size_t m = 0; m < M; ++m) out[m] = bias[m] + detail::dot(w + m * N, x, N);
  return out;
}

inline Tensor dense(const Tensor& input, const Tensor& weights, std::span<const double> bias) {
  detail::require(weights.rank() == 2, "dense weights must be [out, in]");
  detail::require(input.size() == weights.dim(1), "dense expects " + std::to_string(weights.dim(1)) +
                                                      " inputs, got " + std::to_string(input.size()));
  return dense(input, weights.data(), weights.dim(0), bias);
}

inline Tensor dense_backward_into(const Tensor& input, std::span<const double> weights,
                                  const Tensor& grad_out, std::span<double> grad_w,
                                  std::span<double> grad_b, bool want_input_grad) {
  const std::size_t M = grad_out.size(), N = input.size();
  detail::require(weights.size() == M * N, "dense backward: shape mismatch");
  const double* w = weights.data();
  const double* x = input.data().data();
  Tensor grad_in;
  if (want_input_grad) grad_in = Tensor(input.shape());
  for (std::size_t m = 0; m < M; ++m) {
    const double g = grad_out[m];
    grad_b[m] += g;
    if (g == 0.0) continue;
    detail::axpy(g, x, grad_w.data() + m * N, N);
    if (want_input_grad) detail::axpy(g, w + m * N, grad_in.data().data(), N);
  }
  return grad_in;
}

struct DenseGrads {
  Tensor input;
  Tensor weights;
  std::vector<double> bias;
};

inline DenseGrads dense_backward(const Tensor& input, const Tensor& weights,
                                 const Tensor& grad_out) {
  DenseGrads grads{Tensor(), Tensor(weights.shape()), std::vector<double>(weights.dim(0), 0.0)};
  grads.input =
      dense_backward_into(input, weights.data(), grad_out, grads.weights.data(), grads.bias, true);
  return grads;
}

inline Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

inline Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  Tensor out = grad_out;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(input[i] > 0.0)) out[i] = 0.0;
  return out;
}

struct MaxPoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output cell
};

/// Ties go to the lowest flat index in the window.
inline MaxPoolResult maxpool2d(const Tensor& input, std::size_t kernel, std::size_t stride) {
  detail::require(input.rank() == 3, "maxpool2d input must be [C, H, W]");
  detail::require(kernel >= 1, "maxpool2d kernel must be >= 1");
  const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const std::size_t Ho = conv_out_dim(H, kernel, stride), Wo = conv_out_dim(W, kernel, stride);
  MaxPoolResult r{Tensor({C, Ho, Wo}), std::vector<std::size_t>(C * Ho * Wo)};
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < Ho; ++y)
      for (std::size_t x = 0; x < Wo; ++x) {
        std::size_t best = (c * H + y * stride) * W + x * stride;
        for (std::size_t dy = 0; dy < kernel; ++dy)
          for (std::size_t dx = 0; dx < kernel; ++dx) {
            const std::size_t idx = (c * H + y * stride + dy) * W + x * stride + dx;
            if (input[idx] > input[best]) best = idx;
          }
        const std::size_t o = (c * Ho + y) * Wo + x;
        r.output[o] = input[best];
        r.argmax[o] = best;
      }
  return r;
}

inline Tensor maxpool2d_backward(const Shape& input_shape, std::span<const std::size_t> argmax,
                                 const Tensor& grad_out) {
  Tensor grad_in(input_shape);
  for (std::size_t o = 0; o < grad_out.size(); ++o) grad_in[argmax[o]] += grad_out[o];
  return grad_in;
}

inline Tensor flatten(const Tensor& input) { return input.reshaped({input.size()}); }

inline Tensor sigmoid_scaled(const Tensor& input, double scale) {
  Tensor out = input;
  for (auto& v : out.data()) v = scale / (1.0 + std::exp(-v));
  return out;
}

inline Tensor sigmoid_scaled_backward(const Tensor& input, const Tensor& grad_out, double scale) {
  Tensor out = grad_out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-input[i]));
    out[i] *= scale * s * (1.0 - s);
  }
  return out;
}

inline Tensor softmax(const Tensor& logits) {
  Tensor out = logits;
  const double m = *std::max_element(out.data().begin(), out.data().end());
  double sum = 0.0;
  for (auto& v : out.data()) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : out.data()) v /= sum;
  return out;
}

struct LossAndGrad {
  double loss;
  Tensor grad;
};

/// Max-subtracted softmax followed by -log p[label]; grad = p - onehot(label).
inline LossAndGrad softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (label >= logits.size()) {
    throw DataError("label " + std::to_string(label) + " out of range for " +
                    std::to_string(logits.size()) + " classes");
  }
  const double m = *std::max_element(logits.data().begin(), logits.data().end());
  double sum = 0.0;
  for (double v : logits.data()) sum += std::exp(v - m);
  const double log_sum = std::log(sum);
  LossAndGrad r{log_sum + m - logits[label], Tensor(logits.shape())};
  for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(logits[i] - m - log_sum);
  r.grad[label] -= 1.0;
  return r;
}

}  // namespace qser
