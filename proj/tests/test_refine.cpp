#include <cmath>

#include <gtest/gtest.h>

#include "lgo/refine.hpp"
#include "lgo/search.hpp"
#include "test_support.hpp"

namespace lgo {
namespace {

Dataset step_data(double cut, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n01;
  std::vector<double> x(400), y(400);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = n01(rng);
    y[i] = (x[i] > cut ? 1.0 : 0.0) + 0.05 * n01(rng);
  }
  return testing::make_dataset({x}, y, {"x1"});
}

TEST(GateDescent, ReachesGridOptimum) {
  const Dataset d = step_data(0.6, 3);
  Evaluator ev;
  Expression probe = testing::parse("lgo_thre(x1,0,0)", {"x1"});
  double grid_best = std::numeric_limits<double>::infinity();
  for (double at = -2.0; at <= 6.0; at += 0.05)
    for (double b = -3.0; b <= 3.0; b += 0.01) {
      probe.nodes[2].value = at;
      probe.nodes[3].value = b;
      grid_best = std::min(grid_best, rmse_loss(ev, probe, d));
    }
  const RefineResult r = coordinate_descent_gates(testing::parse("lgo_thre(x1,0.5,-1)", {"x1"}), d);
  EXPECT_LE(r.final_loss, grid_best + 1e-3);
  EXPECT_NEAR(r.expr.nodes[3].value, 0.6, 0.05);
}

TEST(ConstantRefit, MatchesLeastSquares) {
  const Dataset d = testing::random_dataset(300, 1, 14);
  std::vector<double> y(d.rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 2.5 * d.columns[0][i] + 0.7 + 0.01 * std::sin(7.0 * i);
  const Dataset lin = testing::make_dataset(d.columns, y, {"x1"});
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = lin.columns[0][i];
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx), icpt = (sy - slope * sx) / n;
  RefineConfig cfg;
  cfg.steps = 400;
  const RefineResult r = refit_constants(testing::parse("add(mul(1,x1),0)", {"x1"}), lin, cfg);
  EXPECT_NEAR(r.expr.nodes[2].value, slope, 1e-4);
  EXPECT_NEAR(r.expr.nodes[4].value, icpt, 1e-4);
}

TEST(Refine, AcceptedLossesStrictlyDecrease) {
  const Dataset d = testing::random_dataset(200, 3, 15);
  const std::vector<std::string> exprs = {"add(mul(0.3,x1),lgo_thre(x2,0.2,0.9))",
                                          "mul(lgo_and2(x1,x3,1.0,-0.5),2.0)",
                                          "add(lgo(x3,2,0.1),gate_expr(log(x1),0.5,-0.2))"};
  for (const auto& s : exprs) {
    Evaluator ev;
    const RefineResult r = refit_and_refine(testing::parse(s), d);
    double prev = r.initial_loss;
    for (double l : r.accepted_losses) {
      ASSERT_LT(l, prev) << s;
      prev = l;
    }
    EXPECT_LE(r.final_loss, r.initial_loss);
    EXPECT_EQ(r.final_loss, rmse_loss(ev, r.expr, d));
    for (const auto& n : r.expr.nodes)
      if (n.kind == NodeKind::thr) EXPECT_LE(std::abs(n.value), 3.0);
  }
}

TEST(Refine, NonFiniteStartIsFlaggedAndUntouched) {
  const Dataset d = testing::make_dataset({{900.0, 1.0}}, {0.0, 1.0}, {"x1"});
  const Expression e = testing::parse("mul(exp(x1),lgo_thre(x1,1,0.5))", {"x1"});
  const RefineResult r = refit_and_refine(e, d);
  EXPECT_TRUE(r.non_finite_start);
  EXPECT_EQ(print_expr(r.expr, {"x1"}), print_expr(e, {"x1"}));
}

TEST(Refine, NoParametersIsNoOp) {
  const Dataset d = testing::random_dataset(50, 2, 16);
  const Expression e = testing::parse("add(x1,x2)", {"x1", "x2"});
  const RefineResult r = refit_and_refine(e, d);
  EXPECT_EQ(r.final_loss, r.initial_loss);
  EXPECT_TRUE(r.accepted_losses.empty());
}

TEST(Refine, RejectsBadConfig) {
  RefineConfig cfg;
  cfg.shrink = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.steps = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
}  // namespace lgo
