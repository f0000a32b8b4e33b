// Dataset ingestion, seeded train/test splits, train-only z-scoring, and
// inversion of z-space thresholds to natural units.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lgo/csv.hpp"
#include "lgo/expr.hpp"

namespace lgo {

enum class Task { regression, binary };

inline Task parse_task(std::string_view s) {
  if (s == "regression") return Task::regression;
  if (s == "binary" || s == "classification") return Task::binary;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected regression or binary)");
}

inline const char* task_name(Task t) { return t == Task::regression ? "regression" : "binary"; }

/// Column-major table of numeric features plus a target.
struct Dataset {
  FeatureNames feature_names;
  std::vector<std::string> units;  // parallel to feature_names; may be empty strings
  std::vector<std::vector<double>> columns;
  std::vector<double> y;
  Task task = Task::regression;
  std::string target_name = "y";
  std::size_t dropped_rows = 0;

  std::size_t rows() const { return y.size(); }
  std::size_t features() const { return feature_names.size(); }

  int feature_index(std::string_view name) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    return it == feature_names.end() ? -1 : static_cast<int>(it - feature_names.begin());
  }

  Dataset select_rows(const std::vector<std::size_t>& idx) const {
    Dataset out;
    out.feature_names = feature_names;
    out.units = units;
    out.task = task;
    out.target_name = target_name;
    out.columns.resize(columns.size());
    for (std::size_t j = 0; j < columns.size(); ++j) {
      out.columns[j].reserve(idx.size());
      for (auto i : idx) out.columns[j].push_back(columns[j][i]);
    }
    out.y.reserve(idx.size());
    for (auto i : idx) out.y.push_back(y[i]);
    return out;
  }
};

namespace detail {
inline bool is_missing(std::string_view s) {
  std::string t(s);
  t.erase(0, t.find_first_not_of(" \t"));
  t.erase(t.find_last_not_of(" \t") + 1);
  return t.empty() || t == "NA" || t == "na" || t == "N/A" || t == "nan" || t == "NaN" ||
         t == "NAN" || t == "?" || t == "null";
}
}  // namespace detail

/// Builds a dataset from an in-memory table. Rows with any missing retained
/// value are dropped and counted.
inline Dataset dataset_from_table(const CsvTable& table, std::string_view target_column, Task task,
                                  std::string_view name = "<csv>") {
  const int target = table.require_column(target_column, name);
  Dataset d;
  d.task = task;
  d.target_name = std::string(target_column);
  std::vector<int> feature_cols;
  std::unordered_set<std::string> seen;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (static_cast<int>(c) == target) continue;
    if (!seen.insert(table.header[c]).second)
      throw DataError(std::string(name) + ": duplicate column '" + table.header[c] + "'");
    d.feature_names.push_back(table.header[c]);
    feature_cols.push_back(static_cast<int>(c));
  }
  d.units.assign(d.feature_names.size(), "");
  d.columns.resize(d.feature_names.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    bool missing = detail::is_missing(row[static_cast<std::size_t>(target)]);
    for (int c : feature_cols) missing = missing || detail::is_missing(row[static_cast<std::size_t>(c)]);
    if (missing) {
      ++d.dropped_rows;
      continue;
    }
    const std::string ctx = std::string(name) + " row " + std::to_string(r + 1);
    for (std::size_t j = 0; j < feature_cols.size(); ++j)
      d.columns[j].push_back(parse_double(row[static_cast<std::size_t>(feature_cols[j])],
                                          ctx + " column '" + d.feature_names[j] + "'"));
    const double yv = parse_double(row[static_cast<std::size_t>(target)], ctx + " target");
    if (task == Task::binary && yv != 0.0 && yv != 1.0)
      throw DataError(ctx + ": binary target must be 0 or 1");
    d.y.push_back(yv);
  }
  if (d.y.empty()) throw DataError(std::string(name) + ": empty dataset after dropping missing rows");
  return d;
}

inline Dataset load_csv(const std::string& path, std::string_view target_column, Task task) {
  return dataset_from_table(read_csv(path), target_column, task, path);
}

inline std::string dataset_to_csv(const Dataset& d) {
  std::vector<std::string> header = d.feature_names;
  header.push_back(d.target_name);
  CsvWriter w(header);
  std::vector<std::string> row(header.size());
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.features(); ++j) row[j] = format_number(d.columns[j][i]);
    row.back() = format_number(d.y[i]);
    w.row(row);
  }
  return w.str();
}

inline void write_csv(const Dataset& d, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path);
  f << dataset_to_csv(d);
}

/// The canonical seed list for ten-seed experiments.
inline const std::vector<std::uint64_t>& canonical_seeds() {
  static const std::vector<std::uint64_t> seeds = {1, 2, 3, 5, 8, 13, 21, 34, 55, 89};
  return seeds;
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle split. Index sets are sorted, disjoint and exhaustive.
inline SplitIndices split_indices(std::size_t n, std::uint64_t seed, double test_fraction = 0.2) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test_fraction must lie in (0, 1)");
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  if (n_test == 0 || n_test >= n)
    throw DataError("dataset too small to split (" + std::to_string(n) + " rows)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  SplitIndices s;
  s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

inline std::pair<Dataset, Dataset> split(const Dataset& d, std::uint64_t seed, double test_fraction = 0.2) {
  auto s = split_indices(d.rows(), seed, test_fraction);
  return {d.select_rows(s.train), d.select_rows(s.test)};
}

/// Per-feature z-scoring statistics, always fitted on the training split.
struct FeatureStats {
  FeatureNames feature_names;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<bool> standardized;  // false for constant columns passed through
  std::string computed_on = "train";

  int index(std::string_view name) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    return it == feature_names.end() ? -1 : static_cast<int>(it - feature_names.begin());
  }

  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < feature_names.size(); ++j)
      if (!standardized[j]) out.push_back("feature '" + feature_names[j] + "' has zero variance on train; passed through");
    return out;
  }
};

/// Mean and population standard deviation (denominator n).
inline std::pair<double, double> mean_std(std::span<const double> v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

inline FeatureStats fit_feature_stats(const Dataset& train) {
  if (train.rows() == 0) throw DataError("cannot standardize an empty training split");
  FeatureStats s;
  s.feature_names = train.feature_names;
  for (const auto& col : train.columns) {
    auto [m, sd] = mean_std(col);
    const bool ok = sd > 0.0 && std::isfinite(sd);
    s.mu.push_back(ok ? m : 0.0);
    s.sigma.push_back(ok ? sd : 1.0);
    s.standardized.push_back(ok);
  }
  return s;
}

inline double standardize_value(double x, std::size_t feature, const FeatureStats& s) {
  return (x - s.mu[feature]) / s.sigma[feature];
}

inline Dataset apply_stats(const Dataset& d, const FeatureStats& s) {
  if (d.feature_names != s.feature_names) throw DataError("feature set does not match the fitted statistics");
  Dataset z = d;
  for (std::size_t j = 0; j < z.features(); ++j)
    for (double& v : z.columns[j]) v = standardize_value(v, j, s);
  return z;
}

struct Standardized {
  Dataset z_train;
  Dataset z_test;
  FeatureStats stats;
};

/// z = (x - mu) / sigma with (mu, sigma) from `train` only.
inline Standardized standardize(const Dataset& train, const Dataset& test) {
  FeatureStats s = fit_feature_stats(train);
  return {apply_stats(train, s), apply_stats(test, s), std::move(s)};
}

/// b_raw = mu + sigma * b_z.
inline double invert_threshold(double b_z, std::size_t feature, const FeatureStats& s) {
  return s.mu.at(feature) + s.sigma.at(feature) * b_z;
}

inline double invert_threshold(double b_z, std::string_view feature, const FeatureStats& s) {
  const int j = s.index(feature);
  if (j < 0) throw DataError("no statistics for feature '" + std::string(feature) + "'");
  return invert_threshold(b_z, static_cast<std::size_t>(j), s);
}

inline std::string stats_to_csv(const FeatureStats& s) {
  CsvWriter w({"feature", "mu", "sigma"});
  for (std::size_t j = 0; j < s.feature_names.size(); ++j) w.add(s.feature_names[j], s.mu[j], s.sigma[j]);
  return w.str();
}

inline FeatureStats stats_from_table(const CsvTable& t, std::string_view name = "<stats>") {
  const int f = t.require_column("feature", name);
  const int m = t.require_column("mu", name);
  const int sd = t.require_column("sigma", name);
  FeatureStats s;
  for (const auto& r : t.rows) {
    s.feature_names.push_back(r[static_cast<std::size_t>(f)]);
    s.mu.push_back(parse_double(r[static_cast<std::size_t>(m)], name));
    s.sigma.push_back(parse_double(r[static_cast<std::size_t>(sd)], name));
    s.standardized.push_back(true);
  }
  return s;
}

}  // namespace lgo
