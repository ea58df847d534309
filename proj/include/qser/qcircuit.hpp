#pragma once

// Trainable circuit families.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <variant>

#include "qser/error.hpp"
#include "qser/qstate.hpp"
#include "qser/rng.hpp"

namespace qser {

struct StronglyEntangling {
  std::size_t n_layers = 2;
  friend bool operator==(const StronglyEntangling&, const StronglyEntangling&) = default;
};

/// rots_per_layer == 0 means "one slot per qubit".
struct RandomLayers {
  std::size_t n_layers = 2;
  std::size_t rots_per_layer = 0;
  std::uint64_t seed = 42;
  double imprimitive_ratio = 0.3;
  friend bool operator==(const RandomLayers&, const RandomLayers&) = default;
};

using CircuitKind = std::variant<StronglyEntangling, RandomLayers>;

inline const char* circuit_name(const CircuitKind& kind) {
  return std::holds_alternative<StronglyEntangling>(kind) ? "strongly_entangling"
                                                          : "random_layers";
}

inline CircuitKind parse_circuit(std::string_view name) {
  if (name == "strongly_entangling") return StronglyEntangling{};
  if (name == "random_layers") return RandomLayers{};
  throw ConfigError("unknown circuit '" + std::string(name) + "'");
}

/// Per layer: ROT3 on every qubit (3 trainable angles each), then a ring of
/// CNOTs i -> (i + 1) mod n.
inline CircuitSpec build_strongly_entangling(std::size_t n_qubits, std::size_t n_layers) {
  if (n_qubits < 2) throw ConfigError("strongly entangling layers need at least 2 qubits");
  if (n_layers < 1) throw ConfigError("strongly entangling layers need n_layers >= 1");
  CircuitSpec c(n_qubits);
  for (std::size_t l = 0; l < n_layers; ++l) {
    for (std::size_t q = 0; q < n_qubits; ++q) c.append(GateOp::rot3(q, 0, 0, 0), true);
    for (std::size_t q = 0; q < n_qubits; ++q) c.append(GateOp::cnot(q, (q + 1) % n_qubits));
  }
  return c;
}

/// Seeded random layers. Layer l draws from Rng(seed, "random-layers", l).
/// Each of the rots_per_layer slots draws u = uniform01(); if u < ratio it
/// emits CNOT(control = index(n), target = index(n - 1) skipping control),
/// otherwise a trainable rotation of kind index(3) in {RX, RY, RZ} on wire
/// index(n).
inline CircuitSpec build_random_layers(std::size_t n_qubits, std::size_t n_layers,
                                       std::size_t rots_per_layer, std::uint64_t seed,
                                       double imprimitive_ratio) {
  if (n_qubits < 2) throw ConfigError("random layers need at least 2 qubits");
  if (n_layers < 1) throw ConfigError("random layers need n_layers >= 1");
  if (rots_per_layer < 1) throw ConfigError("random layers need rots_per_layer >= 1");
  if (!(imprimitive_ratio >= 0.0 && imprimitive_ratio <= 1.0)) {
    throw ConfigError("imprimitive_ratio must lie in [0, 1]");
  }
  CircuitSpec c(n_qubits);
  for (std::size_t l = 0; l < n_layers; ++l) {
    Rng rng(seed, "random-layers", l);
    for (std::size_t s = 0; s < rots_per_layer; ++s) {
      if (rng.uniform01() < imprimitive_ratio) {
        const auto control = static_cast<std::size_t>(rng.uniform_index(n_qubits));
        auto target = static_cast<std::size_t>(rng.uniform_index(n_qubits - 1));
        if (target >= control) ++target;
        c.append(GateOp::cnot(control, target));
      } else {
        const auto kind = rng.uniform_index(3);
        const auto wire = static_cast<std::size_t>(rng.uniform_index(n_qubits));
        const GateOp g = kind == 0 ? GateOp::rx(wire, 0) : kind == 1 ? GateOp::ry(wire, 0)
                                                                    : GateOp::rz(wire, 0);
        c.append(g, true);
      }
    }
  }
  return c;
}

inline CircuitSpec build_circuit(std::size_t n_qubits, const CircuitKind& kind) {
  if (const auto* se = std::get_if<StronglyEntangling>(&kind)) {
    return build_strongly_entangling(n_qubits, se->n_layers);
  }
  const auto& rl = std::get<RandomLayers>(kind);
  return build_random_layers(n_qubits, rl.n_layers,
                             rl.rots_per_layer == 0 ? n_qubits : rl.rots_per_layer, rl.seed,
                             rl.imprimitive_ratio);
}

inline std::size_t param_count(const CircuitSpec& circuit) { return circuit.param_count(); }

/// One gate per line, e.g. "ROT3  q2      #6 #7 #8".
inline std::string render_circuit(const CircuitSpec& circuit) {
  std::string out;
  for (std::size_t i = 0; i < circuit.gates().size(); ++i) {
    const GateOp& g = circuit.gates()[i];
    std::string line = gate_name(g.kind);
    line.resize(6, ' ');
    std::string wires;
    for (std::size_t w : g.wire_list()) wires += "q" + std::to_string(w) + " ";
    wires.resize(8, ' ');
    line += wires;
    const std::size_t off = circuit.param_offset(i);
    for (std::size_t s = 0; s < param_arity(g.kind); ++s) {
      if (off != CircuitSpec::kFixed) {
        line += "#" + std::to_string(off + s) + " ";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g ", g.params[s]);
        line += buf;
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace qser
