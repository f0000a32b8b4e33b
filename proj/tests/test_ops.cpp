#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "lgo/ops.hpp"
#include "test_support.hpp"

namespace lgo {
namespace {

TEST(Sigmoid, ClipsPreActivation) {
  EXPECT_DOUBLE_EQ(clipped_sigmoid(1e6), sigmoid(60.0));
  EXPECT_DOUBLE_EQ(clipped_sigmoid(-1e6), sigmoid(-60.0));
  EXPECT_GT(clipped_sigmoid(-1e6), 0.0);
  EXPECT_DOUBLE_EQ(clipped_sigmoid(0.0), 0.5);
}

TEST(Softplus, PositiveAndInvertible) {
  for (double t : {-59.0, -20.0, -1.0, 0.0, 0.5, 3.0, 25.0, 59.0}) {
    const double a = softplus(t);
    EXPECT_GT(a, 0.0) << t;
    EXPECT_NEAR(softplus_inverse(a), t, 1e-9 * std::max(1.0, std::abs(t))) << t;
  }
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(softplus(1000.0), softplus(60.0));
}

TEST(Gates, CanonicalValues) {
  EXPECT_DOUBLE_EQ(lgo_hard(1.3, 4.0, 1.3), 0.5);
  EXPECT_DOUBLE_EQ(lgo_soft(2.0, 1.0, 2.0), 1.0);
  EXPECT_NEAR(lgo_hard(1.0, 2.0, 0.0), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_DOUBLE_EQ(gate_expr(0.7, 3.0, -0.2), lgo_soft(0.7, 3.0, -0.2));
}

TEST(Gates, MultiInputDefinitions) {
  const double x = 0.4, y = -1.1, z = 2.0, a = 1.7, b = 0.3;
  const double sx = sigmoid(a * (x - b)), sy = sigmoid(a * (y - b)), sz = sigmoid(a * (z - b));
  EXPECT_NEAR(lgo_pair(x, y, a, b), x * y * sigmoid(a * ((x - y) - b)), 1e-15);
  EXPECT_NEAR(lgo_and2(x, y, a, b), x * y * sx * sy, 1e-15);
  EXPECT_NEAR(lgo_or2(x, y, a, b), (x + y) * (1.0 - (1.0 - sx) * (1.0 - sy)), 1e-15);
  EXPECT_NEAR(lgo_and3(x, y, z, a, b), x * y * z * sx * sy * sz, 1e-15);
}

TEST(Gates, HardGateStaysInUnitInterval) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3), pa(1e-3, 1e4);
  for (int i = 0; i < 10000; ++i) {
    const double g = lgo_hard(u(rng), pa(rng), clip_threshold(u(rng)));
    EXPECT_GT(g, 0.0);
    EXPECT_LE(g, 1.0);
  }
}

TEST(Gates, HeavisideLimit) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> off(0.1, 3.0), bd(-3.0, 3.0);
  for (double a : {1e2, 1e3, 1e4}) {
    const double bound = clipped_sigmoid(-0.1 * a);
    for (int i = 0; i < 1000; ++i) {
      const double b = bd(rng);
      const double x = b + (i % 2 ? off(rng) : -off(rng));
      const double step = x > b ? 1.0 : 0.0;
      EXPECT_LE(std::abs(lgo_hard(x, a, b) - step), bound);
      EXPECT_LE(std::abs(lgo_soft(x, a, b) - x * step), std::abs(x) * bound);
    }
  }
}

TEST(GateGradients, MatchCentralDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ud(-3.0, 3.0), ad(0.1, 5.0);
  const double h = 1e-6;
  for (GateKind kind : {GateKind::soft, GateKind::hard}) {
    auto f = [&](double u, double a, double b) { return kind == GateKind::soft ? lgo_soft(u, a, b) : lgo_hard(u, a, b); };
    for (int i = 0; i < 100; ++i) {
      const double u = ud(rng), a = ad(rng), b = ud(rng);
      const GateGradient g = gate_gradients(kind, u, a, b);
      const double fd_a = (f(u, a + h, b) - f(u, a - h, b)) / (2 * h);
      const double fd_b = (f(u, a, b + h) - f(u, a, b - h)) / (2 * h);
      EXPECT_LT(testing::rel_err(g.d_a, fd_a), 1e-5);
      EXPECT_LT(testing::rel_err(g.d_b, fd_b), 1e-5);
    }
  }
}

TEST(GateGradients, FlatWhenClipped) {
  const GateGradient g = gate_gradients(GateKind::hard, 10.0, 100.0, 0.0);
  EXPECT_EQ(g.d_a, 0.0);
  EXPECT_EQ(g.d_b, 0.0);
}

TEST(ProtectedOps, Guards) {
  EXPECT_DOUBLE_EQ(protected_div(1.0, 0.0), 1e12);
  EXPECT_DOUBLE_EQ(protected_div(1.0, -0.0), -1e12);
  EXPECT_DOUBLE_EQ(protected_div(3.0, 2.0), 1.5);
  EXPECT_DOUBLE_EQ(protected_inv(0.0), 1e12);
  EXPECT_DOUBLE_EQ(protected_log(0.0), std::log(1e-12));
  EXPECT_DOUBLE_EQ(protected_log(-5.0), std::log(1e-12));
  EXPECT_DOUBLE_EQ(protected_sqrt(-4.0), 2.0);
  EXPECT_DOUBLE_EQ(int_pow(-2.0, 3), -8.0);
  EXPECT_DOUBLE_EQ(int_pow(3.0, 2), 9.0);
}

TEST(Thresholds, ClipToRange) {
  EXPECT_EQ(clip_threshold(7.0), 3.0);
  EXPECT_EQ(clip_threshold(-7.0), -3.0);
  EXPECT_EQ(clip_threshold(0.25), 0.25);
}

}  // namespace
}  // namespace lgo
