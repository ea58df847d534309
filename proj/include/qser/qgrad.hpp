#pragma once

// Differentiable quantum layer: embed -> circuit -> measure.
//
// Circuit-parameter gradients use the two-point parameter-shift rule, which
// is exact for the half-angle Pauli rotations every trainable gate uses:
//   df/dtheta_j = (f(theta + pi/2 e_j) - f(theta - pi/2 e_j)) / 2.
//
// Input gradients:
//   Angle / IQP  every embedding angle is shifted the same way (RX/RY/RZ and
//                CPHASE both have generators with eigenvalue gap 1) and the
//                result is pushed to the features through d angle / d feature
//                (1 for rotations, f_j for the f_i * f_j CPHASE angles).
//   Amplitude    central finite differences, h = 1e-6, on the
//                pre-normalisation features.
//
// Batch items are independent; no state is shared between calls.

#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "qser/embed.hpp"
#include "qser/error.hpp"
#include "qser/measure.hpp"
#include "qser/qcircuit.hpp"
#include "qser/qstate.hpp"

namespace qser {

inline constexpr double kShift = std::numbers::pi / 2;
inline constexpr double kAmplitudeFdStep = 1e-6;

struct QuantumLayerConfig {
  std::size_t n_qubits = 8;
  EmbeddingKind embedding = AngleEmbedding{};
  CircuitKind circuit = StronglyEntangling{};
  MeasurementKind measurement = MeasurementKind::PauliZ;

  std::size_t input_width() const { return embedding_width(embedding, n_qubits); }
  std::size_t output_width() const { return measurement_width(measurement, n_qubits); }

  friend bool operator==(const QuantumLayerConfig&, const QuantumLayerConfig&) = default;
};

/// A resolved quantum layer: configuration plus the concrete circuit.
class QuantumPipeline {
 public:
  QuantumPipeline(std::size_t n_qubits, EmbeddingKind embedding, CircuitSpec circuit,
                  MeasurementKind measurement)
      : n_qubits_(n_qubits),
        embedding_(std::move(embedding)),
        circuit_(std::move(circuit)),
        measurement_(measurement) {
    if (circuit_.n_qubits() != n_qubits_) {
      throw ConfigError("quantum layer: circuit qubit count does not match layer");
    }
  }

  explicit QuantumPipeline(const QuantumLayerConfig& config)
      : QuantumPipeline(config.n_qubits, config.embedding,
                        build_circuit(config.n_qubits, config.circuit), config.measurement) {}

  std::size_t n_qubits() const { return n_qubits_; }
  const EmbeddingKind& embedding() const { return embedding_; }
  const CircuitSpec& circuit() const { return circuit_; }
  MeasurementKind measurement() const { return measurement_; }
  std::size_t input_width() const { return embedding_width(embedding_, n_qubits_); }
  std::size_t output_width() const { return measurement_width(measurement_, n_qubits_); }
  std::size_t param_count() const { return circuit_.param_count(); }

  void check(std::span<const double> input, std::span<const double> params) const {
    if (input.size() != input_width()) {
      throw LayerError("quantum layer expects " + std::to_string(input_width()) +
                       " inputs, got " + std::to_string(input.size()));
    }
    if (params.size() != param_count()) {
      throw LayerError("quantum layer expects " + std::to_string(param_count()) +
                       " parameters, got " + std::to_string(params.size()));
    }
  }

  StateVector embed_input(std::span<const double> input) const {
    return embed(input, n_qubits_, embedding_);
  }

  std::vector<double> run(StateVector state, std::span<const double> params) const {
    apply_circuit_inplace(state, circuit_, params);
    return measure(state, measurement_);
  }

  std::vector<double> forward(std::span<const double> input, std::span<const double> params) const {
    check(input, params);
    return run(embed_input(input), params);
  }

 private:
  std::size_t n_qubits_;
  EmbeddingKind embedding_;
  CircuitSpec circuit_;
  MeasurementKind measurement_;
};

inline std::vector<double> quantum_forward(std::span<const double> input,
                                           std::span<const double> params,
                                           const QuantumPipeline& layer) {
  return layer.forward(input, params);
}

inline std::vector<double> quantum_forward(std::span<const double> input,
                                           std::span<const double> params,
                                           const QuantumLayerConfig& config) {
  return QuantumPipeline(config).forward(input, params);
}

namespace detail {

inline double weighted_half_difference(std::span<const double> upstream,
                                       const std::vector<double>& plus,
                                       const std::vector<double>& minus) {
  double acc = 0.0;
  for (std::size_t k = 0; k < upstream.size(); ++k) acc += upstream[k] * (plus[k] - minus[k]);
  return 0.5 * acc;
}

inline void check_upstream(const QuantumPipeline& layer, std::span<const double> upstream) {
  if (upstream.size() != layer.output_width()) {
    throw LayerError("upstream gradient has width " + std::to_string(upstream.size()) +
                     ", layer output is " + std::to_string(layer.output_width()));
  }
}

}  // namespace detail

/// d(upstream . f) / d params via parameter shift.
inline std::vector<double> param_shift_grad(std::span<const double> input,
                                            std::span<const double> params,
                                            const QuantumPipeline& layer,
                                            std::span<const double> upstream) {
  layer.check(input, params);
  detail::check_upstream(layer, upstream);
  const StateVector embedded = layer.embed_input(input);
  std::vector<double> shifted(params.begin(), params.end());
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t j = 0; j < params.size(); ++j) {
    shifted[j] = params[j] + kShift;
    const auto plus = layer.run(embedded, shifted);
    shifted[j] = params[j] - kShift;
    const auto minus = layer.run(embedded, shifted);
    shifted[j] = params[j];
    grad[j] = detail::weighted_half_difference(upstream, plus, minus);
  }
  return grad;
}

inline std::vector<double> param_shift_grad(std::span<const double> input,
                                            std::span<const double> params,
                                            const QuantumLayerConfig& config,
                                            std::span<const double> upstream) {
  return param_shift_grad(input, params, QuantumPipeline(config), upstream);
}

/// d(upstream . f) / d input.
inline std::vector<double> input_grad(std::span<const double> input,
                                      std::span<const double> params,
                                      const QuantumPipeline& layer,
                                      std::span<const double> upstream) {
  layer.check(input, params);
  detail::check_upstream(layer, upstream);
  const std::size_t n = layer.n_qubits();
  std::vector<double> grad(input.size(), 0.0);

  if (std::holds_alternative<AmplitudeEmbedding>(layer.embedding())) {
    std::vector<double> x(input.begin(), input.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = input[i] + kAmplitudeFdStep;
      const auto plus = layer.run(amplitude_embed(x, n), params);
      x[i] = input[i] - kAmplitudeFdStep;
      const auto minus = layer.run(amplitude_embed(x, n), params);
      x[i] = input[i];
      grad[i] = detail::weighted_half_difference(upstream, plus, minus) / kAmplitudeFdStep;
    }
    return grad;
  }

  const EncodingCircuit enc =
      std::holds_alternative<AngleEmbedding>(layer.embedding())
          ? angle_encoding(input, n, std::get<AngleEmbedding>(layer.embedding()).axis)
          : iqp_encoding(input, n, std::get<IqpEmbedding>(layer.embedding()).repeats);
  std::vector<double> angles = enc.angles;
  for (std::size_t k = 0; k < angles.size(); ++k) {
    angles[k] = enc.angles[k] + kShift;
    const auto plus = layer.run(apply_circuit(StateVector(n), enc.circuit, angles), params);
    angles[k] = enc.angles[k] - kShift;
    const auto minus = layer.run(apply_circuit(StateVector(n), enc.circuit, angles), params);
    angles[k] = enc.angles[k];
    const double d_angle = detail::weighted_half_difference(upstream, plus, minus);
    for (const auto& [feature, coeff] : enc.jacobian[k]) grad[feature] += coeff * d_angle;
  }
  return grad;
}

inline std::vector<double> input_grad(std::span<const double> input,
                                      std::span<const double> params,
                                      const QuantumLayerConfig& config,
                                      std::span<const double> upstream) {
  return input_grad(input, params, QuantumPipeline(config), upstream);
}

}  // namespace qser
