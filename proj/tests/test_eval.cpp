#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "lgo/eval.hpp"
#include "test_support.hpp"

namespace lgo {
namespace {

using testing::parse;

double scalar_eval(const std::string& which, double x1, double x2, double x3) {
  const double a = softplus(1.3), b = 0.2;
  if (which == "lgo") return lgo_soft(x1, a, b);
  if (which == "lgo_thre") return lgo_hard(x1, a, b);
  if (which == "lgo_pair") return lgo_pair(x1, x2, a, b);
  if (which == "lgo_and2") return lgo_and2(x1, x2, a, b);
  if (which == "lgo_or2") return lgo_or2(x1, x2, a, b);
  if (which == "lgo_and3") return lgo_and3(x1, x2, x3, a, b);
  return gate_expr(x1 * x2, a, b);
}

TEST(Evaluator, MatchesScalarSemantics) {
  const Dataset d = testing::random_dataset(64, 3, 8);
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"lgo", "lgo(x1,1.3,0.2)"},
      {"lgo_thre", "lgo_thre(x1,1.3,0.2)"},
      {"lgo_pair", "lgo_pair(x1,x2,1.3,0.2)"},
      {"lgo_and2", "lgo_and2(x1,x2,1.3,0.2)"},
      {"lgo_or2", "lgo_or2(x1,x2,1.3,0.2)"},
      {"lgo_and3", "lgo_and3(x1,x2,x3,1.3,0.2)"},
      {"gate_expr", "gate_expr(mul(x1,x2),1.3,0.2)"},
  };
  for (const auto& [name, text] : cases) {
    const auto out = evaluate(parse(text), d);
    for (std::size_t r = 0; r < d.rows(); ++r)
      ASSERT_DOUBLE_EQ(out[r], scalar_eval(name, d.columns[0][r], d.columns[1][r], d.columns[2][r])) << name;
  }
}

TEST(Evaluator, ArithmeticAndProtection) {
  const Dataset d = testing::make_dataset({{0.0, -4.0, 2.0}}, {0, 0, 0}, {"x1"});
  const auto out = evaluate(parse("add(div(1,x1),sqrt(x1))", {"x1"}), d);
  EXPECT_DOUBLE_EQ(out[0], 1e12);
  EXPECT_DOUBLE_EQ(out[1], -0.25 + 2.0);
  EXPECT_DOUBLE_EQ(out[2], 0.5 + std::sqrt(2.0));
  const auto lg = evaluate(parse("log(x1)", {"x1"}), d);
  EXPECT_DOUBLE_EQ(lg[0], std::log(1e-12));
  const auto pw = evaluate(parse("pow(x1,3)", {"x1"}), d);
  EXPECT_DOUBLE_EQ(pw[1], -64.0);
}

TEST(Evaluator, RmseOfNonFiniteIsInfinite) {
  const Dataset d = testing::make_dataset({{800.0, 1.0}}, {0, 0}, {"x1"});
  Evaluator ev;
  EXPECT_TRUE(std::isinf(rmse_loss(ev, parse("exp(x1)", {"x1"}), d)));
}

// Every gate kind: d RMSE / d (a_tilde, b_z, constants) against central
// differences of the loss itself.
TEST(Evaluator, LossGradientMatchesFiniteDifferences) {
  const Dataset d = testing::random_dataset(80, 3, 12);
  const std::vector<std::string> exprs = {
      "mul(1.7,lgo(x1,0.4,0.3))",
      "add(lgo_thre(x2,1.1,-0.4),0.25)",
      "lgo_pair(x1,x2,0.9,0.1)",
      "lgo_and2(x1,x3,0.2,-0.5)",
      "lgo_or2(x2,x3,1.5,0.7)",
      "lgo_and3(x1,x2,x3,0.3,-0.2)",
      "gate_expr(mul(x1,0.8),0.6,0.35)",
      "add(lgo_thre(gate_expr(x2,0.5,0.1),2.0,0.4),mul(x3,-0.6))",
  };
  Evaluator ev;
  const double h = 1e-6;
  for (const auto& text : exprs) {
    const Expression e = parse(text);
    const LossGradient g = rmse_gradient(ev, e, d);
    for (std::size_t i = 0; i < e.size(); ++i) {
      const NodeKind k = e.nodes[i].kind;
      if (k != NodeKind::pos && k != NodeKind::thr && k != NodeKind::constant) continue;
      Expression up = e, dn = e;
      up.nodes[i].value += h;
      dn.nodes[i].value -= h;
      const double fd = (rmse_loss(ev, up, d) - rmse_loss(ev, dn, d)) / (2 * h);
      EXPECT_LT(testing::rel_err(g.grad[i], fd), 1e-5) << text << " node " << i;
    }
  }
}

TEST(SubexprStats, Examples) {
  const Dataset raw = testing::random_dataset(500, 2, 31);
  auto [train, test] = split(raw, 1);
  const Standardized z = standardize(train, test);
  const SubexprStats ident = fit_subexpr_stats(parse("x1", {"x1", "x2"}), z.z_train);
  EXPECT_NEAR(ident.mu, 0.0, 1e-12);
  EXPECT_NEAR(ident.sigma, 1.0, 1e-12);
  EXPECT_TRUE(ident.invertible);
  EXPECT_FALSE(fit_subexpr_stats(parse("add(1,2)", {"x1", "x2"}), z.z_train).invertible);
  const SubexprStats twice = fit_subexpr_stats(parse("mul(2,x2)", {"x1", "x2"}), z.z_train);
  EXPECT_NEAR(twice.sigma, 2.0, 1e-12);
  EXPECT_NEAR(twice.mu, 0.0, 1e-12);
}

}  // namespace
}  // namespace lgo
