#pragma once

// The five optimizers of the grid search. Weight decay is L2 coupled: the
// gradient becomes g + wd * p before the kind-specific rule runs.
//
// Defaults: Adam(beta1 0.9, beta2 0.999, eps 1e-8), RMSProp(rho 0.99,
// eps 1e-8), AdaDelta(rho 0.9, eps 1e-6, lr scales the step), AdaGrad
// (eps 1e-10), SGD without momentum.

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qser/error.hpp"

namespace qser {

enum class OptimizerKind { Adam, SGD, RMSProp, AdaDelta, AdaGrad };

constexpr const char* optimizer_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::RMSProp: return "rmsprop";
    case OptimizerKind::AdaDelta: return "adadelta";
    case OptimizerKind::AdaGrad: return "adagrad";
  }
  return "?";
}

inline OptimizerKind parse_optimizer(std::string_view name) {
  for (auto k : {OptimizerKind::Adam, OptimizerKind::SGD, OptimizerKind::RMSProp,
                 OptimizerKind::AdaDelta, OptimizerKind::AdaGrad}) {
    if (name == optimizer_name(k)) return k;
  }
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double rho = 0.99;
  double momentum = 0.0;

  /// Kind-specific defaults for rho and epsilon.
  static OptimizerConfig defaults(OptimizerKind kind, double lr, double wd = 0.0) {
    OptimizerConfig c;
    c.kind = kind;
    c.learning_rate = lr;
    c.weight_decay = wd;
    switch (kind) {
      case OptimizerKind::RMSProp: c.rho = 0.99; c.epsilon = 1e-8; break;
      case OptimizerKind::AdaDelta: c.rho = 0.9; c.epsilon = 1e-6; break;
      case OptimizerKind::AdaGrad: c.epsilon = 1e-10; break;
      default: break;
    }
    return c;
  }

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw ConfigError("learning_rate must be finite and >= 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  }
};

/// Per-parameter-buffer accumulators.
struct OptimizerState {
  std::size_t step = 0;
  std::vector<double> first;   // Adam m, SGD velocity, AdaDelta E[dx^2]
  std::vector<double> second;  // Adam v, RMSProp/AdaDelta E[g^2], AdaGrad sum g^2
};

inline void optimizer_step(OptimizerState& state, std::span<double> params,
                           std::span<const double> grads, const OptimizerConfig& cfg) {
  if (params.size() != grads.size()) throw ModelError("optimizer: params/grads size mismatch");
  const std::size_t n = params.size();
  if (state.first.size() != n) state.first.assign(n, 0.0);
  if (state.second.size() != n) state.second.assign(n, 0.0);
  ++state.step;
  const double lr = cfg.learning_rate;

  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i] + cfg.weight_decay * params[i];
    double& a = state.first[i];
    double& b = state.second[i];
    switch (cfg.kind) {
      case OptimizerKind::SGD:
        if (cfg.momentum > 0.0) {
          a = cfg.momentum * a + g;
          params[i] -= lr * a;
        } else {
          params[i] -= lr * g;
        }
        break;
      case OptimizerKind::Adam: {
        a = cfg.beta1 * a + (1.0 - cfg.beta1) * g;
        b = cfg.beta2 * b + (1.0 - cfg.beta2) * g * g;
        const double m_hat = a / bc1, v_hat = b / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        break;
      }
      case OptimizerKind::RMSProp:
        b = cfg.rho * b + (1.0 - cfg.rho) * g * g;
        params[i] -= lr * g / (std::sqrt(b) + cfg.epsilon);
        break;
      case OptimizerKind::AdaDelta: {
        b = cfg.rho * b + (1.0 - cfg.rho) * g * g;
        const double delta = std::sqrt(a + cfg.epsilon) / std::sqrt(b + cfg.epsilon) * g;
        a = cfg.rho * a + (1.0 - cfg.rho) * delta * delta;
        params[i] -= lr * delta;
        break;
      }
      case OptimizerKind::AdaGrad:
        b += g * g;
        params[i] -= lr * g / (std::sqrt(b) + cfg.epsilon);
        break;
    }
  }
}

}  // namespace qser
