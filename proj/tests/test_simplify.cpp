#include <cmath>

#include <gtest/gtest.h>

#include "lgo/search.hpp"
#include "lgo/simplify.hpp"
#include "rule_cases.hpp"
#include "test_support.hpp"

namespace lgo {
namespace {

const FeatureNames kNames = {"x1", "x2", "x3"};

SNode square(SNode x) {
  SNode p = SNode::make(SKind::pow, {std::move(x)});
  p.exponent = 2;
  return p;
}

TEST(RuleSoundness, EveryRuleOnGuardedRandomInputs) {
  const Dataset data = testing::random_dataset(48, 3, 77);
  testing::RuleCaseGenerator gen(99);
  for (const auto& rc : gen.cases()) {
    const testing::SoundnessResult r = testing::check_rule_soundness(rc, data, kNames);
    EXPECT_GE(r.fired, 10000) << rc.name;
    EXPECT_EQ(r.failures, 0) << rc.name << ": " << r.first_failure;
  }
}

TEST(RuleSoundness, GuardsRefuseUnprovenDomains) {
  SNode s = SNode::make(SKind::sqrt, {square(SNode::feat(0))});
  EXPECT_FALSE(rewrite::guarded_identities(s));
  SNode l = SNode::make(SKind::log, {SNode::make(SKind::exp, {SNode::feat(1)})});
  EXPECT_FALSE(rewrite::guarded_identities(l));
  SNode e = SNode::make(SKind::exp, {SNode::make(SKind::log, {SNode::feat(2)})});
  EXPECT_FALSE(rewrite::guarded_identities(e));
}

TEST(Simplify, FixpointIdempotentAndEquivalent) {
  const Dataset raw = testing::random_dataset(120, 3, 5);
  auto [train, test] = split(raw, 5);
  const Standardized z = standardize(train, test);
  int checked = 0;
  for (OperatorSet set : {OperatorSet::soft, OperatorSet::hard}) {
    const auto reg = register_primitives(set);
    const TreeGenerator gen(reg, 3);
    Rng rng(6);
    for (int i = 0; i < 300; ++i) {
      const Expression e = gen.ramped_half_and_half(rng, 2, 5);
      const SimplifyResult r = simplify(e, z.z_test);
      if (!r.equivalent) continue;
      ++checked;
      const auto before = evaluate(e, z.z_test), after = evaluate(r.tree, z.z_test);
      for (std::size_t k = 0; k < before.size(); ++k)
        if (std::isfinite(before[k])) {
          ASSERT_LT(std::abs(before[k] - after[k]), kEquivalenceTol);
        }
      SNode again = r.tree;
      EXPECT_FALSE(rewrite::fold_constants(again));
      EXPECT_FALSE(rewrite::remove_neutral(again));
      EXPECT_FALSE(rewrite::guarded_identities(again));
      EXPECT_FALSE(rewrite::flatten_and_sort(again, kNames));
      EXPECT_FALSE(rewrite::compact_gates(again));
      EXPECT_EQ(again, r.tree);
    }
  }
  EXPECT_GT(checked, 500);
}

TEST(Simplify, CanonicalExamples) {
  const Dataset d = testing::random_dataset(30, 3, 2);
  EXPECT_EQ(simplify(testing::parse("add(mul(x2,1),add(0,x1))"), d).text, "add(x1,x2)");
  EXPECT_EQ(simplify(testing::parse("mul(add(2,3),x1)"), d).text, "mul(5,x1)");
  EXPECT_EQ(simplify(testing::parse("lgo_thre(x1,1.5,0.25)"), d).text, "gate(x1,1.5,0.25)");
  EXPECT_EQ(simplify(testing::parse("lgo(x3,1,-0.5)"), d).text, "mul(x3,gate(x3,1,-0.5))");
}

TEST(Simplify, NonFiniteIntermediateFlagsStage) {
  const Dataset d = testing::make_dataset({{800.0, 1.0, 2.0}}, {0, 0, 0}, {"x1"});
  const SimplifyResult r = simplify(testing::parse("add(x1,mul(exp(x1),0))", {"x1"}), d);
  EXPECT_FALSE(r.equivalent);
  EXPECT_EQ(r.failed_stage, "remove_neutral");
}

TEST(Equivalence, PointwiseTolerance) {
  const Dataset d = testing::random_dataset(3, 1, 1);
  const std::vector<double> a = {1.0, 2.0, 3.0};
  EXPECT_TRUE(check_equivalence(a, std::vector<double>{1.0, 2.0 + 5e-10, 3.0}, d).pointwise_ok);
  EXPECT_FALSE(check_equivalence(a, std::vector<double>{1.0, 2.0 + 2e-9, 3.0}, d).ok());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(check_equivalence(std::vector<double>{nan, 1, 1}, a, d).ok());
}

TEST(Merge, NearDuplicateGatesShareMedianParameters) {
  SNode tree = SNode::make(SKind::add, {SNode::make(SKind::mul, {SNode::make_gate(SNode::feat(0), 1.0, 0.50), SNode::feat(1)}),
                                        SNode::make(SKind::mul, {SNode::make_gate(SNode::feat(0), 1.2, 0.52), SNode::feat(2)})});
  SNode merged = tree;
  EXPECT_EQ(merge_gate_parameters(merged, 0.05, kNames), 1u);
  EXPECT_EQ(gate_count(merged), 1u);
  EXPECT_EQ(print_snode(merged, kNames), "mul(add(x2,x3),gate(x1,1.1,0.51))");
  SNode apart = tree;
  EXPECT_EQ(merge_gate_parameters(apart, 0.01, kNames), 0u);
  EXPECT_EQ(apart, tree);
  EXPECT_THROW(merge_gate_parameters(apart, -1.0, kNames), ConfigError);
}

TEST(Merge, RollsBackWhenPredictionsMove) {
  const Dataset d = testing::random_dataset(40, 3, 3);
  SNode near = SNode::make(SKind::add, {SNode::make_gate(SNode::feat(0), 1.0, 0.50), SNode::make_gate(SNode::feat(0), 1.0, 0.53)});
  const MergeResult moved = merge_near_duplicate_gates(near, 0.05, d);
  EXPECT_TRUE(moved.rolled_back);
  EXPECT_EQ(moved.tree, near);
  SNode same = SNode::make(SKind::add, {SNode::make(SKind::mul, {SNode::make_gate(SNode::feat(1), 2.0, 0.1), SNode::feat(0)}),
                                        SNode::make(SKind::mul, {SNode::make_gate(SNode::feat(1), 2.0, 0.1), SNode::feat(2)})});
  const MergeResult kept = merge_near_duplicate_gates(same, 0.05, d);
  EXPECT_FALSE(kept.rolled_back);
  EXPECT_EQ(kept.merged, 1u);
  EXPECT_EQ(gate_count(kept.tree), 1u);
}

TEST(Display, NaturalUnitsAtUnitPrecision) {
  FeatureStats s;
  s.feature_names = {"map", "lactate", "glucose"};
  s.mu = {90.0, 2.5, 100.0};
  s.sigma = {10.0, 0.8, 10.0};
  s.standardized = {true, true, true};
  const std::vector<std::string> units = {"mmHg", "mmol/L", "mg/dL"};
  EXPECT_EQ(display_format(SNode::make_gate(SNode::feat(0), 1, 3.83), s.feature_names, units, &s), "gate(map > 128.3 mmHg)");
  EXPECT_EQ(display_format(SNode::make_gate(SNode::feat(1), 1, -0.75), s.feature_names, units, &s), "gate(lactate > 1.9 mmol/L)");
  EXPECT_EQ(display_format(SNode::make_gate(SNode::feat(2), 1, -1.5), s.feature_names, units, &s), "gate(glucose > 85 mg/dL)");
  EXPECT_EQ(unit_precision("other"), 3);
  EXPECT_EQ(format_fixed(-0.0001, 1), "0.0");
}

TEST(Display, InfixPrecedence) {
  const FeatureNames n = {"a", "b", "c"};
  auto show = [&](const std::string& s) { return display_format(to_snode(testing::parse(s, n)), n, {}); };
  EXPECT_EQ(show("sub(a,add(b,c))"), "a - (b + c)");
  EXPECT_EQ(show("sub(add(a,b),c)"), "a + b - c");
  EXPECT_EQ(show("mul(add(a,b),c)"), "(a + b) * c");
  EXPECT_EQ(show("add(a,mul(b,c))"), "a + b * c");
  EXPECT_EQ(show("div(a,mul(b,c))"), "a / (b * c)");
  EXPECT_EQ(show("add(a,-2)"), "a + (-2)");
  EXPECT_EQ(show("sqrt(add(a,b))"), "sqrt(a + b)");
}

}  // namespace
}  // namespace lgo
