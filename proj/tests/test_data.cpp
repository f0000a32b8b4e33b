#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "lgo/csv.hpp"
#include "lgo/data.hpp"
#include "test_support.hpp"

namespace lgo {
namespace {

CsvTable table_of(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in, "mem.csv");
}

TEST(Csv, QuotedFieldsAndCrlf) {
  const CsvTable t = table_of("a,\"b,c\",d\r\n1,\"x \"\"q\"\"\",3\r\n");
  ASSERT_EQ(t.header.size(), 3u);
  EXPECT_EQ(t.header[1], "b,c");
  EXPECT_EQ(t.rows[0][1], "x \"q\"");
  EXPECT_EQ(t.rows[0][2], "3");
}

TEST(Csv, RaggedRowsRejected) {
  EXPECT_THROW(table_of("a,b\n1,2,3\n"), DataError);
  EXPECT_THROW(table_of(""), DataError);
  EXPECT_THROW(table_of("a,b\n\"1,2\n"), DataError);
}

TEST(Csv, WriterEscapes) {
  CsvWriter w({"name", "v"});
  w.add(std::string("a,b"), 0.5);
  EXPECT_EQ(w.str(), "name,v\n\"a,b\",0.5\n");
}

TEST(Dataset, DropsMissingRows) {
  const Dataset d = dataset_from_table(table_of("x1,x2,y\n1,2,3\nNA,2,3\n4,,5\n6,7,8\n"), "y", Task::regression);
  EXPECT_EQ(d.rows(), 2u);
  EXPECT_EQ(d.dropped_rows, 2u);
  EXPECT_EQ(d.feature_names, (FeatureNames{"x1", "x2"}));
  EXPECT_EQ(d.columns[1][1], 7.0);
}

TEST(Dataset, Errors) {
  EXPECT_THROW(dataset_from_table(table_of("x1,y\n1,2\n"), "target", Task::regression), DataError);
  EXPECT_THROW(dataset_from_table(table_of("x1,y\n1,0.5\n"), "y", Task::binary), DataError);
  EXPECT_THROW(dataset_from_table(table_of("x1,y\nabc,1\n"), "y", Task::regression), DataError);
  EXPECT_THROW(dataset_from_table(table_of("x1,x1,y\n1,2,1\n"), "y", Task::regression), DataError);
  EXPECT_THROW(dataset_from_table(table_of("x1,y\nNA,1\n"), "y", Task::regression), DataError);
}

TEST(Split, DeterministicDisjointExhaustive) {
  const auto a = split_indices(101, 7);
  const auto b = split_indices(101, 7);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.test.size(), 20u);
  std::set<std::size_t> all(a.train.begin(), a.train.end());
  for (auto i : a.test) EXPECT_TRUE(all.insert(i).second);
  EXPECT_EQ(all.size(), 101u);
  EXPECT_NE(split_indices(101, 8).test, a.test);
  EXPECT_THROW(split_indices(3, 1, 0.1), DataError);
  EXPECT_THROW(split_indices(100, 1, 1.0), ConfigError);
}

TEST(Stats, MatchTwoPassOracle) {
  const Dataset d = testing::random_dataset(257, 3, 4);
  const FeatureStats s = fit_feature_stats(d);
  for (std::size_t j = 0; j < 3; ++j) {
    long double sum = 0.0L;
    for (double v : d.columns[j]) sum += v;
    const long double mean = sum / d.rows();
    long double ss = 0.0L;
    for (double v : d.columns[j]) ss += (v - mean) * (v - mean);
    EXPECT_NEAR(s.mu[j], static_cast<double>(mean), 1e-14);
    EXPECT_NEAR(s.sigma[j], std::sqrt(static_cast<double>(ss / d.rows())), 1e-14);
  }
}

TEST(Stats, TrainOnlyNoLeakage) {
  const Dataset d = testing::random_dataset(200, 2, 9);
  auto [train, test] = split(d, 3);
  const Standardized a = standardize(train, test);
  for (auto& col : test.columns)
    for (double& v : col) v = v * 1000.0 + 55.0;
  const Standardized b = standardize(train, test);
  EXPECT_EQ(a.stats.mu, b.stats.mu);
  EXPECT_EQ(a.stats.sigma, b.stats.sigma);
  EXPECT_EQ(a.stats.computed_on, "train");
  for (std::size_t j = 0; j < 2; ++j) {
    auto [m, sd] = mean_std(a.z_train.columns[j]);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(sd, 1.0, 1e-12);
  }
}

TEST(Stats, ConstantColumnPassesThrough) {
  const Dataset d = testing::make_dataset({{5, 5, 5, 5}, {1, 2, 3, 4}}, {0, 1, 0, 1});
  const FeatureStats s = fit_feature_stats(d);
  EXPECT_FALSE(s.standardized[0]);
  EXPECT_EQ(s.mu[0], 0.0);
  EXPECT_EQ(s.sigma[0], 1.0);
  EXPECT_EQ(s.warnings().size(), 1u);
  EXPECT_EQ(apply_stats(d, s).columns[0][2], 5.0);
}

TEST(Inversion, HandArithmetic) {
  FeatureStats s;
  s.feature_names = {"map", "lactate"};
  s.mu = {90.0, 2.5};
  s.sigma = {10.0, 0.8};
  s.standardized = {true, true};
  EXPECT_DOUBLE_EQ(invert_threshold(1.5, "map", s), 105.0);
  EXPECT_DOUBLE_EQ(invert_threshold(0.0, "map", s), 90.0);
  EXPECT_DOUBLE_EQ(invert_threshold(-0.625, "lactate", s), 2.0);
  EXPECT_THROW(invert_threshold(0.0, "hdl", s), DataError);
}

TEST(Inversion, RoundTrip) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> mu(-200.0, 200.0), sd(0.01, 50.0);
  FeatureStats s;
  s.feature_names = {"f"};
  s.standardized = {true};
  for (int i = 0; i < 10000; ++i) {
    s.mu = {mu(rng)};
    s.sigma = {sd(rng)};
    const double v = s.mu[0] + s.sigma[0] * std::uniform_real_distribution<double>(-4.0, 4.0)(rng);
    const double back = invert_threshold(standardize_value(v, 0, s), 0, s);
    ASSERT_NEAR(back, v, 1e-12);
  }
}

TEST(Stats, CsvRoundTrip) {
  const Dataset d = testing::random_dataset(50, 2, 1);
  const FeatureStats s = fit_feature_stats(d);
  const FeatureStats back = stats_from_table(table_of(stats_to_csv(s)));
  EXPECT_EQ(back.feature_names, s.feature_names);
  EXPECT_EQ(back.mu, s.mu);
  EXPECT_EQ(back.sigma, s.sigma);
}

TEST(Dataset, CsvRoundTrip) {
  const Dataset d = testing::random_dataset(20, 2, 2);
  const Dataset back = dataset_from_table(table_of(dataset_to_csv(d)), "y", Task::regression);
  EXPECT_EQ(back.columns, d.columns);
  EXPECT_EQ(back.y, d.y);
}

}  // namespace
}  // namespace lgo
