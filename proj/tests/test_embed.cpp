#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracle.hpp"
#include "qser/embed.hpp"
#include "qser/measure.hpp"

namespace qser {
namespace {

using testing::C;
constexpr double kPi = std::numbers::pi;

void expect_amps(const StateVector& s, const std::vector<C>& want, double tol = 1e-10) {
  ASSERT_EQ(s.dim(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(std::abs(s[i] - want[i]), 0.0, tol) << i;
}

TEST(AngleEmbed, ZeroFeaturesGiveZeroStateOnEveryAxis) {
  const std::vector<double> f(5, 0.0);
  for (Axis a : {Axis::X, Axis::Y, Axis::Z}) {
    const auto s = angle_embed(f, 5, a);
    EXPECT_NEAR(std::abs(s[0] - C(1, 0)), 0.0, 1e-15);
  }
}

TEST(AngleEmbed, RxPiOnOneQubit) {
  const std::vector<double> f{kPi};
  const auto s = angle_embed(f, 1, Axis::X);
  const auto p = probabilities(s);
  EXPECT_NEAR(p[0], 0.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0, 1e-15);
  EXPECT_NEAR(std::abs(s[1] - C(0, -1)), 0.0, 1e-15);
}

TEST(AngleEmbed, TwoQubitYMatchesOracle) {
  const std::vector<double> f{kPi / 2, kPi / 3};
  const auto s = angle_embed(f, 2, Axis::Y);
  // kron(RY(pi/2), RY(pi/3)) |00>, evaluated by hand.
  expect_amps(s, {0.6123724356957945, 0.3535533905932738, 0.6123724356957945, 0.3535533905932738});
  const auto u = testing::circuit_matrix({GateOp::ry(0, f[0]), GateOp::ry(1, f[1])}, 2);
  expect_amps(s, testing::apply(u, testing::zero_vector(2)));
}

TEST(AngleEmbed, LengthMismatchIsEmbeddingError) {
  const std::vector<double> f{0.1, 0.2};
  EXPECT_THROW(angle_embed(f, 3), EmbeddingError);
}

TEST(AmplitudeEmbed, BasisAndUniformAndPythagorean) {
  expect_amps(amplitude_embed(std::vector<double>{1, 0, 0, 0}, 2), {1.0, 0.0, 0.0, 0.0});
  expect_amps(amplitude_embed(std::vector<double>{1, 1, 1, 1}, 2), {0.5, 0.5, 0.5, 0.5});
  expect_amps(amplitude_embed(std::vector<double>{3, 4}, 1), {0.6, 0.8});
}

TEST(AmplitudeEmbed, PadsWithTrailingZeros) {
  expect_amps(amplitude_embed(std::vector<double>{3, 4}, 2), {0.6, 0.8, 0.0, 0.0});
}

TEST(AmplitudeEmbed, Errors) {
  EXPECT_THROW(amplitude_embed(std::vector<double>{0, 0, 0}, 2), EmbeddingError);
  EXPECT_THROW(amplitude_embed(std::vector<double>(5, 1.0), 2), EmbeddingError);
}

TEST(AmplitudeEmbed, ScaleInvariant) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> f(8), g(8);
    const double c = rng.uniform(1e-3, 1e3);
    for (std::size_t i = 0; i < 8; ++i) {
      f[i] = rng.uniform(-1, 1);
      g[i] = c * f[i];
    }
    const auto a = amplitude_embed(f, 3), b = amplitude_embed(g, 3);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(std::abs(a[i] - b[i]), 0.0, 1e-12);
  }
}

TEST(IqpEmbed, ZeroFeaturesUniformForOddRepeats) {
  for (std::size_t reps : {1u, 3u, 5u}) {
    const auto p = probabilities(iqp_embed(std::vector<double>(4, 0.0), 4, reps));
    for (double x : p) EXPECT_NEAR(x, 1.0 / 16, 1e-12);
  }
}

TEST(IqpEmbed, ZeroFeaturesEvenRepeatsReturnToZeroState) {
  // With every phase zero each repeat is a layer of H, and H.H = I.
  for (std::size_t reps : {2u, 4u}) {
    const auto p = probabilities(iqp_embed(std::vector<double>(4, 0.0), 4, reps));
    EXPECT_NEAR(p[0], 1.0, 1e-12);
  }
}

TEST(IqpEmbed, SingleQubitStaysBalanced) {
  const auto p = probabilities(iqp_embed(std::vector<double>{1.234}, 1, 1));
  EXPECT_NEAR(p[0], 0.5, 1e-12);
  EXPECT_NEAR(p[1], 0.5, 1e-12);
}

TEST(IqpEmbed, TwoQubitsTwoRepeatsMatchesExpandedGateList) {
  const std::vector<double> f{0.7, 1.1};
  std::vector<GateOp> gates;
  for (int r = 0; r < 2; ++r) {
    gates.push_back(GateOp::h(0));
    gates.push_back(GateOp::h(1));
    gates.push_back(GateOp::rz(0, 0.7));
    gates.push_back(GateOp::rz(1, 1.1));
    gates.push_back(GateOp::cphase(0, 1, 0.7 * 1.1));
  }
  const auto want = testing::apply(testing::circuit_matrix(gates, 2), testing::zero_vector(2));
  expect_amps(iqp_embed(f, 2, 2), want);
}

TEST(IqpEmbed, Errors) {
  EXPECT_THROW(iqp_embed(std::vector<double>{0.1}, 2, 1), EmbeddingError);
  EXPECT_THROW(iqp_embed(std::vector<double>{0.1, 0.2}, 2, 0), EmbeddingError);
}

TEST(Embed, NormOneForAllKinds) {
  Rng rng(31);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> f(6), a(64);
    for (auto& x : f) x = rng.uniform(-3, 3);
    for (auto& x : a) x = rng.uniform(-1, 1);
    EXPECT_NEAR(embed(f, 6, AngleEmbedding{Axis::Y}).norm_squared(), 1.0, 1e-10);
    EXPECT_NEAR(embed(f, 6, IqpEmbedding{2}).norm_squared(), 1.0, 1e-10);
    EXPECT_NEAR(embed(a, 6, AmplitudeEmbedding{}).norm_squared(), 1.0, 1e-10);
  }
}

TEST(Embed, NegativeAnglesAccepted) {
  const std::vector<double> f{-0.5, -2.0};
  EXPECT_NO_THROW(angle_embed(f, 2));
}

TEST(Embed, WidthAndNames) {
  EXPECT_EQ(embedding_width(AngleEmbedding{}, 8), 8u);
  EXPECT_EQ(embedding_width(IqpEmbedding{}, 8), 8u);
  EXPECT_EQ(embedding_width(AmplitudeEmbedding{}, 8), 256u);
  EXPECT_EQ(std::string(embedding_name(parse_embedding("iqp"))), "iqp");
  EXPECT_THROW(parse_embedding("basis"), ConfigError);
}

}  // namespace
}  // namespace qser
