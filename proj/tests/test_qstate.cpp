#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracle.hpp"
#include "qser/qstate.hpp"

namespace qser {
namespace {

using testing::C;
constexpr double kTol = 1e-10;
const double kR = 1.0 / std::sqrt(2.0);

void expect_state(const StateVector& s, const std::vector<C>& expected, double tol = kTol) {
  ASSERT_EQ(s.dim(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_NEAR(std::abs(s[i] - expected[i]), 0.0, tol) << "amplitude " << i;
  }
}

TEST(ZeroState, OneTwoEightQubits) {
  expect_state(new_zero_state(1), {1.0, 0.0});
  expect_state(new_zero_state(2), {1.0, 0.0, 0.0, 0.0});
  const auto s8 = new_zero_state(8);
  ASSERT_EQ(s8.dim(), 256u);
  EXPECT_EQ(s8[0], C(1.0, 0.0));
  for (std::size_t i = 1; i < 256; ++i) EXPECT_EQ(s8[i], C(0.0, 0.0));
}

TEST(ZeroState, RejectsOutOfRange) {
  EXPECT_THROW(new_zero_state(0), ConfigError);
  EXPECT_THROW(new_zero_state(13), ConfigError);
  EXPECT_NO_THROW(new_zero_state(12));
}

TEST(ApplyGate, HadamardOnZero) {
  expect_state(apply_gate(new_zero_state(1), GateOp::h(0)), {kR, kR});
}

TEST(ApplyGate, PauliXFlipsZeroToOne) {
  expect_state(apply_gate(new_zero_state(1), GateOp::x(0)), {0.0, 1.0});
}

TEST(ApplyGate, CnotOnTenGivesEleven) {
  StateVector s = apply_gate(new_zero_state(2), GateOp::x(0));  // |10>
  expect_state(apply_gate(s, GateOp::cnot(0, 1)), {0.0, 0.0, 0.0, 1.0});
}

TEST(ApplyGate, RzOnZeroIsGlobalPhase) {
  const double t = 0.73;
  const auto s = apply_gate(new_zero_state(1), GateOp::rz(0, t));
  expect_state(s, {std::exp(C{0, -t / 2}), 0.0});
  EXPECT_NEAR(std::norm(s[0]), 1.0, 1e-15);
}

TEST(ApplyGate, QubitZeroIsMostSignificantBit) {
  // X on qubit 0 of 3 qubits moves |000> to |100> = index 4.
  const auto s = apply_gate(new_zero_state(3), GateOp::x(0));
  EXPECT_EQ(s[4], C(1.0, 0.0));
}

TEST(ApplyGate, WireOutOfRangeIsCircuitError) {
  EXPECT_THROW(apply_gate(new_zero_state(2), GateOp::x(2)), CircuitError);
  EXPECT_THROW(apply_gate(new_zero_state(2), GateOp::cnot(1, 1)), CircuitError);
}

TEST(ApplyCircuit, EmptyCircuitIsIdentity) {
  Rng rng(1);
  const auto s = testing::random_state(rng, 3);
  EXPECT_EQ(apply_circuit(s, CircuitSpec(3), {}), s);
}

TEST(ApplyCircuit, BellState) {
  CircuitSpec c(2);
  c.append(GateOp::h(0));
  c.append(GateOp::cnot(0, 1));
  expect_state(apply_circuit(new_zero_state(2), c, {}), {kR, 0.0, 0.0, kR});
}

TEST(ApplyCircuit, ParamLengthMismatchIsCircuitError) {
  CircuitSpec c(1);
  c.append(GateOp::rx(0, 0.0), true);
  EXPECT_THROW(apply_circuit(new_zero_state(1), c, {}), CircuitError);
  const std::vector<double> two{0.1, 0.2};
  EXPECT_THROW(apply_circuit(new_zero_state(1), c, two), CircuitError);
  EXPECT_THROW(apply_circuit(new_zero_state(2), c, std::vector<double>{0.1}), CircuitError);
}

TEST(ApplyCircuit, TrainableSlotsOverrideStoredAngles) {
  CircuitSpec c(1);
  c.append(GateOp::rx(0, 123.0), true);
  const std::vector<double> p{std::numbers::pi};
  const auto s = apply_circuit(new_zero_state(1), c, p);
  EXPECT_NEAR(std::norm(s[1]), 1.0, 1e-15);
}

TEST(ApplyCircuit, RandomTwoQubitSixGateMatchesExplicitMatrixProduct) {
  Rng rng(2024, "test-circuit");
  for (int trial = 0; trial < 20; ++trial) {
    CircuitSpec c(2);
    std::vector<GateOp> gates;
    for (int k = 0; k < 6; ++k) {
      gates.push_back(testing::random_gate(rng, 2));
      c.append(gates.back());
    }
    const auto input = testing::random_state(rng, 2);
    const auto got = apply_circuit(input, c, {});
    std::vector<C> v(input.amplitudes().begin(), input.amplitudes().end());
    const auto want = testing::apply(testing::circuit_matrix(gates, 2), v);
    expect_state(got, want);
  }
}

TEST(DenseUnitary, EmptyCircuitIsIdentity) {
  const auto u = dense_unitary(CircuitSpec(1), {});
  EXPECT_LE(u.max_abs_diff(ComplexMatrix::identity(2)), 1e-15);
}

TEST(DenseUnitary, SingleXIsPauliXMatrix) {
  CircuitSpec c(1);
  c.append(GateOp::x(0));
  const auto u = dense_unitary(c, {});
  EXPECT_EQ(u(0, 0), C(0, 0));
  EXPECT_EQ(u(0, 1), C(1, 0));
  EXPECT_EQ(u(1, 0), C(1, 0));
  EXPECT_EQ(u(1, 1), C(0, 0));
}

TEST(DenseUnitary, HThenZIsZTimesH) {
  CircuitSpec c(1);
  c.append(GateOp::h(0));
  c.append(GateOp::z(0));
  const auto u = dense_unitary(c, {});
  // Z.H = [[r, r], [-r, r]] by hand.
  EXPECT_NEAR(std::abs(u(0, 0) - kR), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(u(0, 1) - kR), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(u(1, 0) + kR), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(u(1, 1) - kR), 0.0, 1e-12);
}

TEST(DenseUnitary, TooManyQubitsIsSizeError) {
  EXPECT_THROW(dense_unitary(CircuitSpec(7), {}), SizeError);
  EXPECT_NO_THROW(dense_unitary(CircuitSpec(6), {}));
}

TEST(DenseUnitary, EveryGateKindMatchesHandWrittenMatrixAndIsUnitary) {
  Rng rng(77);
  const std::size_t n = 3;
  for (int trial = 0; trial < 200; ++trial) {
    const GateOp g = testing::random_gate(rng, n);
    CircuitSpec c(n);
    c.append(g);
    const auto u = dense_unitary(c, {});
    const auto want = testing::gate_matrix(g, n);
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t k = 0; k < 8; ++k)
        ASSERT_NEAR(std::abs(u(r, k) - want[r][k]), 0.0, 1e-12) << gate_name(g.kind);
    EXPECT_LE((u.adjoint() * u).max_abs_diff(ComplexMatrix::identity(8)), kTol);
  }
}

TEST(Properties, NormPreservedOverHundredGates) {
  Rng rng(99);
  for (std::size_t n = 1; n <= 6; ++n) {
    StateVector s = testing::random_state(rng, n);
    for (int k = 0; k < 100; ++k) apply_gate_inplace(s, testing::random_gate(rng, n));
    EXPECT_NEAR(s.norm_squared(), 1.0, kTol);
  }
}

TEST(Properties, OracleEquivalenceRandomCircuits) {
  Rng rng(5150);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(4);
    CircuitSpec c(n);
    const std::size_t len = 1 + rng.uniform_index(20);
    for (std::size_t k = 0; k < len; ++k) c.append(testing::random_gate(rng, n));
    const auto input = testing::random_state(rng, n);
    const auto got = apply_circuit(input, c, {});
    const auto want = dense_unitary(c, {}).apply(input.amplitudes());
    for (std::size_t i = 0; i < want.size(); ++i) ASSERT_NEAR(std::abs(got[i] - want[i]), 0.0, kTol);
  }
}

TEST(Properties, DeterministicBitIdentical) {
  Rng a(8), b(8);
  CircuitSpec c1(4), c2(4);
  for (int k = 0; k < 40; ++k) {
    c1.append(testing::random_gate(a, 4));
    c2.append(testing::random_gate(b, 4));
  }
  EXPECT_EQ(apply_circuit(new_zero_state(4), c1, {}), apply_circuit(new_zero_state(4), c2, {}));
}

TEST(StateVector, FromAmplitudesValidates) {
  EXPECT_THROW(StateVector::from_amplitudes({1.0, 0.0, 0.0}), ConfigError);
  EXPECT_THROW(StateVector::from_amplitudes({1.0, 1.0}), ConfigError);
  EXPECT_THROW(StateVector::from_amplitudes({C(NAN, 0), 0.0}), ConfigError);
  const auto s = StateVector::from_amplitudes({0.6, 0.8});
  EXPECT_EQ(s.n_qubits(), 1u);
}

}  // namespace
}  // namespace qser
