#pragma once

// Projections from a quantum state to classical vectors.
//
// "Z" is read as the deterministic per-qubit probability of outcome |1>,
// P1_i = (1 - <Z_i>) / 2, so the combined "Z + PauliZ" output equals
// (1 + <Z_i>) / 2, an affine transform of PauliZ. No sampling is performed.

#include <string>
#include <string_view>
#include <vector>

#include "qser/error.hpp"
#include "qser/qstate.hpp"

namespace qser {

enum class MeasurementKind { PauliZ, PauliX, ZProb, ZPlusPauliZ, Probability };

constexpr const char* measurement_name(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::PauliZ: return "pauliz";
    case MeasurementKind::PauliX: return "paulix";
    case MeasurementKind::ZProb: return "zprob";
    case MeasurementKind::ZPlusPauliZ: return "z_plus_pauliz";
    case MeasurementKind::Probability: return "probability";
  }
  return "?";
}

inline MeasurementKind parse_measurement(std::string_view name) {
  for (auto k : {MeasurementKind::PauliZ, MeasurementKind::PauliX, MeasurementKind::ZProb,
                 MeasurementKind::ZPlusPauliZ, MeasurementKind::Probability}) {
    if (name == measurement_name(k)) return k;
  }
  throw ConfigError("unknown measurement '" + std::string(name) + "'");
}

constexpr std::size_t measurement_width(MeasurementKind kind, std::size_t n_qubits) {
  return kind == MeasurementKind::Probability ? (std::size_t{1} << n_qubits) : n_qubits;
}

constexpr bool is_expectation_kind(MeasurementKind kind) {
  return kind != MeasurementKind::Probability;
}

inline std::vector<double> expect_pauliz(const StateVector& state) {
  const std::size_t n = state.n_qubits();
  std::vector<double> out(n, 0.0);
  const auto amps = state.amplitudes();
  for (std::size_t b = 0; b < amps.size(); ++b) {
    const double p = std::norm(amps[b]);
    for (std::size_t q = 0; q < n; ++q) out[q] += (b & qubit_mask(n, q)) ? -p : p;
  }
  return out;
}

/// <X_q> = 2 Re sum_{b: bit q = 0} conj(a_b) a_{b | mask_q}
inline std::vector<double> expect_paulix(const StateVector& state) {
  const std::size_t n = state.n_qubits();
  std::vector<double> out(n, 0.0);
  const auto amps = state.amplitudes();
  for (std::size_t q = 0; q < n; ++q) {
    const std::size_t mask = qubit_mask(n, q);
    double acc = 0.0;
    for (std::size_t b = 0; b < amps.size(); ++b) {
      if (b & mask) continue;
      acc += (std::conj(amps[b]) * amps[b | mask]).real();
    }
    out[q] = 2.0 * acc;
  }
  return out;
}

inline std::vector<double> prob_one_z(const StateVector& state) {
  const std::size_t n = state.n_qubits();
  std::vector<double> out(n, 0.0);
  const auto amps = state.amplitudes();
  for (std::size_t b = 0; b < amps.size(); ++b) {
    const double p = std::norm(amps[b]);
    for (std::size_t q = 0; q < n; ++q) {
      if (b & qubit_mask(n, q)) out[q] += p;
    }
  }
  return out;
}

/// Born rule: P(b) = |<b|psi>|^2.
inline std::vector<double> probabilities(const StateVector& state) {
  std::vector<double> out;
  out.reserve(state.dim());
  for (const auto& a : state.amplitudes()) out.push_back(std::norm(a));
  return out;
}

inline std::vector<double> measure(const StateVector& state, MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::PauliZ:
      return expect_pauliz(state);
    case MeasurementKind::PauliX:
      return expect_paulix(state);
    case MeasurementKind::ZProb:
      return prob_one_z(state);
    case MeasurementKind::Probability:
      return probabilities(state);
    case MeasurementKind::ZPlusPauliZ: {
      auto z = expect_pauliz(state);
      const auto p1 = prob_one_z(state);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += p1[i];
      return z;
    }
  }
  return {};
}

/// Purity Tr(rho_q^2) of the reduced single-qubit state of wire q.
inline double reduced_purity(const StateVector& state, std::size_t q) {
  const std::size_t n = state.n_qubits();
  const std::size_t mask = qubit_mask(n, q);
  double p0 = 0.0, p1 = 0.0;
  Complex off{0.0, 0.0};
  const auto amps = state.amplitudes();
  for (std::size_t b = 0; b < amps.size(); ++b) {
    if (b & mask) {
      p1 += std::norm(amps[b]);
    } else {
      p0 += std::norm(amps[b]);
      off += amps[b] * std::conj(amps[b | mask]);
    }
  }
  return p0 * p0 + p1 * p1 + 2.0 * std::norm(off);
}

}  // namespace qser
