#pragma once

// Dense statevector simulation.
//
// Basis ordering: basis index b = sum_i q_i * 2^(n-1-i), i.e. qubit 0 is the
// most significant bit of the index. Every module uses this convention.
//
// Gate conventions:
//   RX(t) = exp(-i t X / 2), RY(t) = exp(-i t Y / 2), RZ(t) = exp(-i t Z / 2)
//   ROT3(a, b, c) = RZ(c) RY(b) RZ(a)   (RZ(a) acts first)
//   CPHASE(t) = diag(1, 1, 1, e^{i t}) on (wires[0], wires[1])
//   CNOT: wires[0] is the control, wires[1] the target.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qser/error.hpp"

namespace qser {

using Complex = std::complex<double>;

inline constexpr std::size_t kMaxQubits = 12;
inline constexpr std::size_t kMaxDenseQubits = 6;
inline constexpr double kNormTolerance = 1e-10;

inline constexpr std::size_t qubit_mask(std::size_t n_qubits, std::size_t wire) {
  return std::size_t{1} << (n_qubits - 1 - wire);
}

class StateVector {
 public:
  /// |0...0> on n_qubits qubits.
  explicit StateVector(std::size_t n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
      throw ConfigError("n_qubits must be in [1, " + std::to_string(kMaxQubits) +
                        "], got " + std::to_string(n_qubits));
    }
    amps_.assign(std::size_t{1} << n_qubits, Complex{0.0, 0.0});
    amps_[0] = Complex{1.0, 0.0};
  }

  /// Takes ownership of explicit amplitudes. The vector must have a
  /// power-of-two length, finite entries and unit norm.
  static StateVector from_amplitudes(std::vector<Complex> amps) {
    const std::size_t dim = amps.size();
    if (dim < 2 || (dim & (dim - 1)) != 0) {
      throw ConfigError("amplitude count must be a power of two >= 2, got " +
                        std::to_string(dim));
    }
    std::size_t n = 0;
    while ((std::size_t{1} << n) < dim) ++n;
    StateVector s(n);
    double norm = 0.0;
    for (const auto& a : amps) {
      if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) {
        throw ConfigError("non-finite amplitude");
      }
      norm += std::norm(a);
    }
    if (std::abs(norm - 1.0) > kNormTolerance) {
      throw ConfigError("amplitudes are not normalised (norm^2 = " +
                        std::to_string(norm) + ")");
    }
    s.amps_ = std::move(amps);
    return s;
  }

  std::size_t n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return amps_.size(); }

  std::span<const Complex> amplitudes() const { return amps_; }
  std::span<Complex> amplitudes() { return amps_; }

  const Complex& operator[](std::size_t i) const { return amps_[i]; }
  Complex& operator[](std::size_t i) { return amps_[i]; }

  double norm_squared() const {
    double total = 0.0;
    for (const auto& a : amps_) total += std::norm(a);
    return total;
  }

  friend bool operator==(const StateVector&, const StateVector&) = default;

 private:
  std::size_t n_qubits_;
  std::vector<Complex> amps_;
};

inline StateVector new_zero_state(std::size_t n_qubits) { return StateVector(n_qubits); }

enum class GateKind { RX, RY, RZ, ROT3, H, X, Z, CNOT, CPHASE };

constexpr std::size_t wire_arity(GateKind kind) {
  return (kind == GateKind::CNOT || kind == GateKind::CPHASE) ? 2 : 1;
}

constexpr std::size_t param_arity(GateKind kind) {
  switch (kind) {
    case GateKind::RX:
    case GateKind::RY:
    case GateKind::RZ:
    case GateKind::CPHASE:
      return 1;
    case GateKind::ROT3:
      return 3;
    default:
      return 0;
  }
}

constexpr const char* gate_name(GateKind kind) {
  switch (kind) {
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::ROT3: return "ROT3";
    case GateKind::H: return "H";
    case GateKind::X: return "X";
    case GateKind::Z: return "Z";
    case GateKind::CNOT: return "CNOT";
    case GateKind::CPHASE: return "CPHASE";
  }
  return "?";
}

struct GateOp {
  GateKind kind = GateKind::H;
  std::array<std::size_t, 2> wires{};
  std::array<double, 3> params{};

  std::span<const std::size_t> wire_list() const { return {wires.data(), wire_arity(kind)}; }
  std::span<const double> param_list() const { return {params.data(), param_arity(kind)}; }

  static GateOp rx(std::size_t w, double t) { return {GateKind::RX, {w, 0}, {t, 0, 0}}; }
  static GateOp ry(std::size_t w, double t) { return {GateKind::RY, {w, 0}, {t, 0, 0}}; }
  static GateOp rz(std::size_t w, double t) { return {GateKind::RZ, {w, 0}, {t, 0, 0}}; }
  static GateOp rot3(std::size_t w, double a, double b, double c) {
    return {GateKind::ROT3, {w, 0}, {a, b, c}};
  }
  static GateOp h(std::size_t w) { return {GateKind::H, {w, 0}, {}}; }
  static GateOp x(std::size_t w) { return {GateKind::X, {w, 0}, {}}; }
  static GateOp z(std::size_t w) { return {GateKind::Z, {w, 0}, {}}; }
  static GateOp cnot(std::size_t control, std::size_t target) {
    return {GateKind::CNOT, {control, target}, {}};
  }
  static GateOp cphase(std::size_t a, std::size_t b, double t) {
    return {GateKind::CPHASE, {a, b}, {t, 0, 0}};
  }

  void validate(std::size_t n_qubits) const {
    const auto ws = wire_list();
    for (std::size_t w : ws) {
      if (w >= n_qubits) {
        throw CircuitError(std::string(gate_name(kind)) + ": wire " + std::to_string(w) +
                           " out of range for " + std::to_string(n_qubits) + " qubits");
      }
    }
    if (ws.size() == 2 && ws[0] == ws[1]) {
      throw CircuitError(std::string(gate_name(kind)) + ": wires must be distinct");
    }
  }

  friend bool operator==(const GateOp&, const GateOp&) = default;
};

struct ParamSlot {
  std::size_t gate;
  std::size_t slot;
  friend bool operator==(const ParamSlot&, const ParamSlot&) = default;
};

/// Ordered gate list with trainable parameter slots. Gates appended as
/// trainable expose all of their angle slots, in order, as consecutive
/// trainable parameters.
class CircuitSpec {
 public:
  static constexpr std::size_t kFixed = std::numeric_limits<std::size_t>::max();

  explicit CircuitSpec(std::size_t n_qubits) : n_qubits_(n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
      throw ConfigError("circuit n_qubits must be in [1, " + std::to_string(kMaxQubits) + "]");
    }
  }

  void append(const GateOp& gate, bool trainable = false) {
    gate.validate(n_qubits_);
    gates_.push_back(gate);
    if (trainable && param_arity(gate.kind) > 0) {
      offsets_.push_back(slots_.size());
      for (std::size_t s = 0; s < param_arity(gate.kind); ++s) {
        slots_.push_back({gates_.size() - 1, s});
      }
    } else {
      offsets_.push_back(kFixed);
    }
  }

  std::size_t n_qubits() const { return n_qubits_; }
  const std::vector<GateOp>& gates() const { return gates_; }
  /// Trainable parameter position -> (gate index, parameter slot).
  const std::vector<ParamSlot>& param_index_map() const { return slots_; }
  std::size_t param_count() const { return slots_.size(); }
  /// First trainable parameter position of gate i, or kFixed.
  std::size_t param_offset(std::size_t gate) const { return offsets_[gate]; }

  /// Gate i with its trainable slots filled from params.
  GateOp bound_gate(std::size_t i, std::span<const double> params) const {
    GateOp g = gates_[i];
    if (offsets_[i] != kFixed) {
      for (std::size_t s = 0; s < param_arity(g.kind); ++s) g.params[s] = params[offsets_[i] + s];
    }
    return g;
  }

  friend bool operator==(const CircuitSpec&, const CircuitSpec&) = default;

 private:
  std::size_t n_qubits_;
  std::vector<GateOp> gates_;
  std::vector<std::size_t> offsets_;
  std::vector<ParamSlot> slots_;
};

using Mat2 = std::array<Complex, 4>;  // row-major [[m0, m1], [m2, m3]]

inline Mat2 mat2_mul(const Mat2& a, const Mat2& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3],
          a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
}

inline Mat2 rx_matrix(double t) {
  const double c = std::cos(t / 2), s = std::sin(t / 2);
  return {Complex{c, 0}, Complex{0, -s}, Complex{0, -s}, Complex{c, 0}};
}

inline Mat2 ry_matrix(double t) {
  const double c = std::cos(t / 2), s = std::sin(t / 2);
  return {Complex{c, 0}, Complex{-s, 0}, Complex{s, 0}, Complex{c, 0}};
}

inline Mat2 rz_matrix(double t) {
  return {std::polar(1.0, -t / 2), Complex{0, 0}, Complex{0, 0}, std::polar(1.0, t / 2)};
}

inline Mat2 rot3_matrix(double a, double b, double c) {
  return mat2_mul(rz_matrix(c), mat2_mul(ry_matrix(b), rz_matrix(a)));
}

namespace detail {

inline void apply_mat2(std::span<Complex> amps, std::size_t mask, const Mat2& m) {
  const std::size_t dim = amps.size();
  for (std::size_t hi = 0; hi < dim; hi += 2 * mask) {
    for (std::size_t i0 = hi; i0 < hi + mask; ++i0) {
      const std::size_t i1 = i0 + mask;
      const Complex a0 = amps[i0];
      const Complex a1 = amps[i1];
      amps[i0] = m[0] * a0 + m[1] * a1;
      amps[i1] = m[2] * a0 + m[3] * a1;
    }
  }
}

inline void apply_diag(std::span<Complex> amps, std::size_t mask, Complex d0, Complex d1) {
  const std::size_t dim = amps.size();
  for (std::size_t hi = 0; hi < dim; hi += 2 * mask) {
    for (std::size_t i0 = hi; i0 < hi + mask; ++i0) {
      amps[i0] *= d0;
      amps[i0 + mask] *= d1;
    }
  }
}

}  // namespace detail

/// In-place gate application; O(2^n) per gate.
inline void apply_gate_inplace(StateVector& state, const GateOp& gate) {
  const std::size_t n = state.n_qubits();
  gate.validate(n);
  auto amps = state.amplitudes();
  const std::size_t m0 = qubit_mask(n, gate.wires[0]);
  switch (gate.kind) {
    case GateKind::RX:
      detail::apply_mat2(amps, m0, rx_matrix(gate.params[0]));
      break;
    case GateKind::RY:
      detail::apply_mat2(amps, m0, ry_matrix(gate.params[0]));
      break;
    case GateKind::RZ:
      detail::apply_diag(amps, m0, std::polar(1.0, -gate.params[0] / 2),
                         std::polar(1.0, gate.params[0] / 2));
      break;
    case GateKind::ROT3:
      detail::apply_mat2(amps, m0, rot3_matrix(gate.params[0], gate.params[1], gate.params[2]));
      break;
    case GateKind::H: {
      const double r = 1.0 / std::sqrt(2.0);
      detail::apply_mat2(amps, m0, {Complex{r, 0}, Complex{r, 0}, Complex{r, 0}, Complex{-r, 0}});
      break;
    }
    case GateKind::X: {
      const std::size_t dim = amps.size();
      for (std::size_t hi = 0; hi < dim; hi += 2 * m0) {
        for (std::size_t i0 = hi; i0 < hi + m0; ++i0) std::swap(amps[i0], amps[i0 + m0]);
      }
      break;
    }
    case GateKind::Z:
      detail::apply_diag(amps, m0, Complex{1, 0}, Complex{-1, 0});
      break;
    case GateKind::CNOT: {
      const std::size_t mt = qubit_mask(n, gate.wires[1]);
      for (std::size_t b = 0; b < amps.size(); ++b) {
        if ((b & m0) && !(b & mt)) std::swap(amps[b], amps[b | mt]);
      }
      break;
    }
    case GateKind::CPHASE: {
      const std::size_t m1 = qubit_mask(n, gate.wires[1]);
      const Complex phase = std::polar(1.0, gate.params[0]);
      for (std::size_t b = 0; b < amps.size(); ++b) {
        if ((b & m0) && (b & m1)) amps[b] *= phase;
      }
      break;
    }
  }
}

inline StateVector apply_gate(StateVector state, const GateOp& gate) {
  apply_gate_inplace(state, gate);
  return state;
}

inline void check_circuit_args(const StateVector& state, const CircuitSpec& circuit,
                               std::span<const double> params) {
  if (circuit.n_qubits() != state.n_qubits()) {
    throw CircuitError("circuit is for " + std::to_string(circuit.n_qubits()) +
                       " qubits but state has " + std::to_string(state.n_qubits()));
  }
  if (params.size() != circuit.param_count()) {
    throw CircuitError("circuit expects " + std::to_string(circuit.param_count()) +
                       " parameters, got " + std::to_string(params.size()));
  }
}

inline void apply_circuit_inplace(StateVector& state, const CircuitSpec& circuit,
                                  std::span<const double> params) {
  check_circuit_args(state, circuit, params);
  for (std::size_t i = 0; i < circuit.gates().size(); ++i) {
    apply_gate_inplace(state, circuit.bound_gate(i, params));
  }
}

inline StateVector apply_circuit(StateVector state, const CircuitSpec& circuit,
                                 std::span<const double> params) {
  apply_circuit_inplace(state, circuit, params);
  return state;
}

/// Square complex matrix, row-major.
class ComplexMatrix {
 public:
  explicit ComplexMatrix(std::size_t dim) : dim_(dim), data_(dim * dim) {}

  static ComplexMatrix identity(std::size_t dim) {
    ComplexMatrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t dim() const { return dim_; }
  Complex& operator()(std::size_t r, std::size_t c) { return data_[r * dim_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * dim_ + c]; }

  ComplexMatrix adjoint() const {
    ComplexMatrix out(dim_);
    for (std::size_t r = 0; r < dim_; ++r)
      for (std::size_t c = 0; c < dim_; ++c) out(c, r) = std::conj((*this)(r, c));
    return out;
  }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.dim_);
    for (std::size_t r = 0; r < a.dim_; ++r)
      for (std::size_t k = 0; k < a.dim_; ++k) {
        const Complex v = a(r, k);
        for (std::size_t c = 0; c < a.dim_; ++c) out(r, c) += v * b(k, c);
      }
    return out;
  }

  std::vector<Complex> apply(std::span<const Complex> v) const {
    std::vector<Complex> out(dim_);
    for (std::size_t r = 0; r < dim_; ++r)
      for (std::size_t c = 0; c < dim_; ++c) out[r] += (*this)(r, c) * v[c];
    return out;
  }

  /// max |a_ij - b_ij|
  double max_abs_diff(const ComplexMatrix& other) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i)
      worst = std::max(worst, std::abs(data_[i] - other.data_[i]));
    return worst;
  }

 private:
  std::size_t dim_;
  std::vector<Complex> data_;
};

/// Full unitary of a circuit, column j = circuit applied to basis state j.
/// Test oracle only; limited to kMaxDenseQubits.
inline ComplexMatrix dense_unitary(const CircuitSpec& circuit, std::span<const double> params) {
  const std::size_t n = circuit.n_qubits();
  if (n > kMaxDenseQubits) {
    throw SizeError("dense_unitary supports at most " + std::to_string(kMaxDenseQubits) +
                    " qubits, got " + std::to_string(n));
  }
  const std::size_t dim = std::size_t{1} << n;
  ComplexMatrix u(dim);
  for (std::size_t col = 0; col < dim; ++col) {
    StateVector basis(n);
    basis[0] = 0.0;
    basis[col] = 1.0;
    apply_circuit_inplace(basis, circuit, params);
    for (std::size_t row = 0; row < dim; ++row) u(row, col) = basis[row];
  }
  return u;
}

}  // namespace qser
