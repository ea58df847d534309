#pragma once

// Classical feature vector -> quantum state.
//
//   Angle:     R_axis(f_i) on qubit i, starting from |0...0>.
//   Amplitude: features zero-padded to 2^n, L2-normalised, used as real
//              amplitudes.
//   IQP:       per repeat, H on every qubit, RZ(f_i) on qubit i, then
//              CPHASE(f_i * f_j) on every pair i < j.
//
// Inputs are not clamped; range control belongs to whatever feeds the
// embedding.

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "qser/error.hpp"
#include "qser/qstate.hpp"

namespace qser {

enum class Axis { X, Y, Z };

constexpr const char* axis_name(Axis a) {
  switch (a) {
    case Axis::X: return "X";
    case Axis::Y: return "Y";
    case Axis::Z: return "Z";
  }
  return "?";
}

inline Axis parse_axis(std::string_view name) {
  if (name == "X" || name == "x") return Axis::X;
  if (name == "Y" || name == "y") return Axis::Y;
  if (name == "Z" || name == "z") return Axis::Z;
  throw ConfigError("unknown rotation axis '" + std::string(name) + "'");
}

struct AngleEmbedding {
  Axis axis = Axis::X;
  friend bool operator==(const AngleEmbedding&, const AngleEmbedding&) = default;
};

struct AmplitudeEmbedding {
  friend bool operator==(const AmplitudeEmbedding&, const AmplitudeEmbedding&) = default;
};

struct IqpEmbedding {
  std::size_t repeats = 1;
  friend bool operator==(const IqpEmbedding&, const IqpEmbedding&) = default;
};

using EmbeddingKind = std::variant<AngleEmbedding, AmplitudeEmbedding, IqpEmbedding>;

inline const char* embedding_name(const EmbeddingKind& kind) {
  switch (kind.index()) {
    case 0: return "angle";
    case 1: return "amplitude";
    default: return "iqp";
  }
}

inline EmbeddingKind parse_embedding(std::string_view name) {
  if (name == "angle") return AngleEmbedding{};
  if (name == "amplitude") return AmplitudeEmbedding{};
  if (name == "iqp") return IqpEmbedding{};
  throw ConfigError("unknown embedding '" + std::string(name) + "'");
}

/// Number of classical inputs the embedding consumes on n_qubits qubits.
inline std::size_t embedding_width(const EmbeddingKind& kind, std::size_t n_qubits) {
  return std::holds_alternative<AmplitudeEmbedding>(kind) ? (std::size_t{1} << n_qubits)
                                                          : n_qubits;
}

/// Angle-based embeddings expressed as a circuit whose every angle is a
/// parameter slot. jacobian[k] lists (feature index, d angle_k / d feature)
/// pairs, which is what input gradients need.
struct EncodingCircuit {
  CircuitSpec circuit;
  std::vector<double> angles;
  std::vector<std::vector<std::pair<std::size_t, double>>> jacobian;
};

namespace detail {

inline void check_features(std::span<const double> features, std::size_t expected,
                           const char* what) {
  if (features.size() != expected) {
    throw EmbeddingError(std::string(what) + ": expected " + std::to_string(expected) +
                         " features, got " + std::to_string(features.size()));
  }
  for (double f : features) {
    if (!std::isfinite(f)) throw EmbeddingError(std::string(what) + ": non-finite feature");
  }
}

}  // namespace detail

inline EncodingCircuit angle_encoding(std::span<const double> features, std::size_t n_qubits,
                                      Axis axis) {
  detail::check_features(features, n_qubits, "angle embedding");
  EncodingCircuit enc{CircuitSpec(n_qubits), {}, {}};
  for (std::size_t i = 0; i < n_qubits; ++i) {
    GateOp g = axis == Axis::X   ? GateOp::rx(i, 0.0)
               : axis == Axis::Y ? GateOp::ry(i, 0.0)
                                 : GateOp::rz(i, 0.0);
    enc.circuit.append(g, true);
    enc.angles.push_back(features[i]);
    enc.jacobian.push_back({{i, 1.0}});
  }
  return enc;
}

inline EncodingCircuit iqp_encoding(std::span<const double> features, std::size_t n_qubits,
                                    std::size_t repeats) {
  detail::check_features(features, n_qubits, "IQP embedding");
  if (repeats < 1) throw EmbeddingError("IQP embedding: repeats must be >= 1");
  EncodingCircuit enc{CircuitSpec(n_qubits), {}, {}};
  for (std::size_t r = 0; r < repeats; ++r) {
    for (std::size_t i = 0; i < n_qubits; ++i) enc.circuit.append(GateOp::h(i));
    for (std::size_t i = 0; i < n_qubits; ++i) {
      enc.circuit.append(GateOp::rz(i, 0.0), true);
      enc.angles.push_back(features[i]);
      enc.jacobian.push_back({{i, 1.0}});
    }
    for (std::size_t i = 0; i < n_qubits; ++i) {
      for (std::size_t j = i + 1; j < n_qubits; ++j) {
        enc.circuit.append(GateOp::cphase(i, j, 0.0), true);
        enc.angles.push_back(features[i] * features[j]);
        enc.jacobian.push_back({{i, features[j]}, {j, features[i]}});
      }
    }
  }
  return enc;
}

inline StateVector angle_embed(std::span<const double> features, std::size_t n_qubits,
                               Axis axis = Axis::X) {
  const auto enc = angle_encoding(features, n_qubits, axis);
  return apply_circuit(StateVector(n_qubits), enc.circuit, enc.angles);
}

inline StateVector iqp_embed(std::span<const double> features, std::size_t n_qubits,
                             std::size_t repeats = 1) {
  const auto enc = iqp_encoding(features, n_qubits, repeats);
  return apply_circuit(StateVector(n_qubits), enc.circuit, enc.angles);
}

inline StateVector amplitude_embed(std::span<const double> features, std::size_t n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw ConfigError("amplitude embedding: n_qubits out of range");
  }
  const std::size_t dim = std::size_t{1} << n_qubits;
  if (features.size() > dim) {
    throw EmbeddingError("amplitude embedding: " + std::to_string(features.size()) +
                         " features do not fit in " + std::to_string(dim) + " amplitudes");
  }
  double norm2 = 0.0;
  for (double f : features) {
    if (!std::isfinite(f)) throw EmbeddingError("amplitude embedding: non-finite feature");
    norm2 += f * f;
  }
  if (norm2 == 0.0) throw EmbeddingError("amplitude embedding: all-zero input cannot be normalised");
  const double inv = 1.0 / std::sqrt(norm2);
  StateVector s(n_qubits);
  s[0] = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) s[i] = Complex{features[i] * inv, 0.0};
  return s;
}

inline StateVector embed(std::span<const double> features, std::size_t n_qubits,
                         const EmbeddingKind& kind) {
  return std::visit(
      [&](const auto& k) -> StateVector {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, AngleEmbedding>) {
          return angle_embed(features, n_qubits, k.axis);
        } else if constexpr (std::is_same_v<K, AmplitudeEmbedding>) {
          return amplitude_embed(features, n_qubits);
        } else {
          return iqp_embed(features, n_qubits, k.repeats);
        }
      },
      kind);
}

}  // namespace qser
