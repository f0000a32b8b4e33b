#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "lgo/metrics.hpp"

namespace lgo {
namespace {

double pairwise_auroc(const std::vector<double>& y, const std::vector<double>& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (y[i] == 1.0 && y[j] == 0.0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

// Average precision by enumerating every distinct threshold.
double threshold_ap(const std::vector<double>& y, const std::vector<double>& s) {
  std::vector<double> cuts(s);
  std::sort(cuts.begin(), cuts.end(), std::greater<>());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double pos = 0.0;
  for (double v : y) pos += v;
  double ap = 0.0, prev = 0.0;
  for (double c : cuts) {
    double tp = 0.0, k = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (s[i] >= c) {
        k += 1.0;
        tp += y[i];
      }
    ap += (tp / pos - prev) * (tp / k);
    prev = tp / pos;
  }
  return ap;
}

TEST(Regression, HandComputed) {
  const std::vector<double> y = {1, 2, 3, 4}, p = {1.5, 2, 2, 5};
  const MetricReport m = regression_metrics(y, p);
  EXPECT_NEAR(m.rmse, std::sqrt((0.25 + 0 + 1 + 1) / 4.0), 1e-15);
  EXPECT_NEAR(m.mae, 2.5 / 4.0, 1e-15);
  EXPECT_NEAR(m.r2, 1.0 - 2.25 / 5.0, 1e-15);
  EXPECT_GE(m.rmse, m.mae);
}

TEST(Regression, ConstantTargetLeavesR2Undefined) {
  const MetricReport m = regression_metrics(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3});
  EXPECT_TRUE(m.r2_undefined);
  EXPECT_TRUE(std::isnan(m.r2));
}

TEST(Regression, LengthMismatchThrows) {
  EXPECT_THROW(regression_metrics(std::vector<double>{1, 2}, std::vector<double>{1}), std::invalid_argument);
}

TEST(Binary, RankMetricsMatchBruteForce) {
  std::mt19937_64 rng(2);
  std::bernoulli_distribution coin(0.35);
  std::uniform_int_distribution<int> level(0, 9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> y, s;
    for (int i = 0; i < 60; ++i) {
      y.push_back(coin(rng) ? 1.0 : 0.0);
      s.push_back(level(rng) / 10.0);  // heavy ties
    }
    if (std::count(y.begin(), y.end(), 1.0) == 0 || std::count(y.begin(), y.end(), 0.0) == 0) continue;
    EXPECT_NEAR(auroc(y, s), pairwise_auroc(y, s), 1e-12);
    EXPECT_NEAR(auprc(y, s), threshold_ap(y, s), 1e-12);
  }
}

TEST(Binary, PerfectAndSingleClass) {
  const std::vector<double> y = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auroc(y, std::vector<double>{0.1, 0.2, 0.8, 0.9}), 1.0);
  EXPECT_DOUBLE_EQ(auprc(y, std::vector<double>{0.1, 0.2, 0.8, 0.9}), 1.0);
  const MetricReport m = binary_metrics(std::vector<double>{1, 1}, std::vector<double>{0.2, 0.7});
  EXPECT_TRUE(m.ranking_undefined);
  EXPECT_NEAR(m.brier, (0.64 + 0.09) / 2.0, 1e-15);
}

TEST(Binary, BrierMapsOutOfRangeScores) {
  const std::vector<double> y = {0, 1}, s = {-2.0, 3.0};
  const MetricReport m = binary_metrics(y, s);
  const double p0 = 1.0 / (1.0 + std::exp(2.0)), p1 = 1.0 / (1.0 + std::exp(-3.0));
  EXPECT_NEAR(m.brier, (p0 * p0 + (1 - p1) * (1 - p1)) / 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(m.auroc, 1.0);
}

TEST(SelfCheck, CleanReportHasNoFindings) {
  const std::vector<double> y = {1, 2, 3, 4}, p = {1.1, 2.2, 2.7, 4.1};
  const MetricReport m = regression_metrics(y, p);
  EXPECT_TRUE(self_check(m, m.rmse).empty());
}

TEST(SelfCheck, FlagsViolations) {
  MetricReport m;
  m.rmse = 0.5;
  m.mae = 0.6;
  m.r2 = -5.0;
  const auto f = self_check(m, 0.5 * (1 + 1e-6));
  std::vector<std::string> codes;
  for (const auto& x : f) codes.push_back(x.code);
  EXPECT_EQ(codes, (std::vector<std::string>{"rmse_lt_mae", "internal_external_mismatch", "r2_anomaly"}));
  EXPECT_TRUE(has_anomaly(f));
}

TEST(SelfCheck, InternalAgreementTolerance) {
  MetricReport m;
  m.rmse = 2.0;
  m.mae = 1.0;
  m.r2 = 0.5;
  EXPECT_TRUE(self_check(m, 2.0 + 1e-10).empty());
  EXPECT_FALSE(self_check(m, 2.0 + 1e-7).empty());
}

TEST(SelfCheck, RmseAtLeastMaeOnRandomData) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> y(30), p(30);
    for (int i = 0; i < 30; ++i) {
      y[i] = n01(rng);
      p[i] = n01(rng);
    }
    const MetricReport m = regression_metrics(y, p);
    EXPECT_GE(m.rmse, m.mae);
  }
}

}  // namespace
}  // namespace lgo
