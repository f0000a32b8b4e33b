// Regression and binary-classification metrics, plus the consistency
// self-checks run on every exported model.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "lgo/data.hpp"
#include "lgo/ops.hpp"

namespace lgo {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MetricReport {
  Task task = Task::regression;
  std::size_t n = 0;
  double rmse = kNaN;
  double mae = kNaN;
  double r2 = kNaN;
  double auroc = kNaN;
  double auprc = kNaN;
  double brier = kNaN;
  bool r2_undefined = false;     // zero-variance target
  bool ranking_undefined = false;  // single-class target

  /// (name, value) pairs in export order for this task.
  std::vector<std::pair<std::string, double>> values() const {
    if (task == Task::regression) return {{"R2", r2}, {"RMSE", rmse}, {"MAE", mae}};
    return {{"AUROC", auroc}, {"AUPRC", auprc}, {"Brier", brier}, {"RMSE", rmse}, {"MAE", mae}};
  }
};

namespace detail {
inline void check_lengths(std::span<const double> y, std::span<const double> y_hat, std::size_t min_n) {
  if (y.size() != y_hat.size()) throw std::invalid_argument("metric inputs differ in length");
  if (y.size() < min_n) throw std::invalid_argument("too few samples for metrics");
}

inline void fill_errors(MetricReport& m, std::span<const double> y, std::span<const double> y_hat) {
  double ss = 0.0, sa = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - y_hat[i];
    ss += d * d;
    sa += std::abs(d);
  }
  const double n = static_cast<double>(y.size());
  m.rmse = std::sqrt(ss / n);
  m.mae = sa / n;
}
}  // namespace detail

inline MetricReport regression_metrics(std::span<const double> y, std::span<const double> y_hat) {
  detail::check_lengths(y, y_hat, 2);
  MetricReport m;
  m.task = Task::regression;
  m.n = y.size();
  detail::fill_errors(m, y, y_hat);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
  }
  if (ss_tot == 0.0) {
    m.r2_undefined = true;
    m.r2 = kNaN;
  } else {
    m.r2 = 1.0 - ss_res / ss_tot;
  }
  return m;
}

/// Area under the ROC curve from the Mann-Whitney rank statistic with
/// mid-ranks for tied scores. NaN when only one class is present.
inline double auroc(std::span<const double> y, std::span<const double> scores) {
  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (y[order[k]] > 0.5) {
        rank_sum_pos += mid;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return kNaN;
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

/// Average precision: step integration of precision over recall, with tied
/// scores forming a single threshold.
inline double auprc(std::span<const double> y, std::span<const double> scores) {
  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t total_pos = 0;
  for (double v : y) total_pos += v > 0.5;
  if (total_pos == 0 || total_pos == n) return kNaN;
  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      tp += y[order[j]] > 0.5;
      ++j;
    }
    seen = j;
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

/// Maps scores into [0, 1]: unchanged when already inside, otherwise every
/// score passes through the logistic function (a monotone map, so rankings
/// are preserved).
inline std::vector<double> probability_scores(std::span<const double> scores) {
  const bool inside = std::all_of(scores.begin(), scores.end(), [](double s) { return s >= 0.0 && s <= 1.0; });
  std::vector<double> p(scores.begin(), scores.end());
  if (!inside)
    for (double& s : p) s = clipped_sigmoid(s);
  return p;
}

inline MetricReport binary_metrics(std::span<const double> y, std::span<const double> scores) {
  detail::check_lengths(y, scores, 1);
  MetricReport m;
  m.task = Task::binary;
  m.n = y.size();
  detail::fill_errors(m, y, scores);
  m.auroc = lgo::auroc(y, scores);
  m.auprc = lgo::auprc(y, scores);
  m.ranking_undefined = std::isnan(m.auroc);
  const auto p = probability_scores(scores);
  double b = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) b += (p[i] - y[i]) * (p[i] - y[i]);
  m.brier = b / static_cast<double>(y.size());
  return m;
}

inline MetricReport compute_metrics(Task task, std::span<const double> y, std::span<const double> y_hat) {
  return task == Task::regression ? regression_metrics(y, y_hat) : binary_metrics(y, y_hat);
}

inline constexpr double kAnomalyR2 = -1.0;

struct SelfCheckFinding {
  std::string code;  // rmse_lt_mae, internal_external_mismatch, r2_anomaly, non_finite
  std::string detail;
};

/// Consistency checks on a metric report. `internal_loss` is the RMSE the
/// search engine computed on the same predictions.
inline std::vector<SelfCheckFinding> self_check(const MetricReport& m, double internal_loss) {
  std::vector<SelfCheckFinding> out;
  if (!std::isfinite(m.rmse) || !std::isfinite(m.mae)) {
    out.push_back({"non_finite", "non-finite RMSE or MAE"});
    return out;
  }
  // equal absolute errors can leave RMSE an ulp below MAE
  if (m.rmse < m.mae * (1.0 - 1e-12)) out.push_back({"rmse_lt_mae", "RMSE " + format_number(m.rmse) + " < MAE " + format_number(m.mae)});
  if (!(std::abs(internal_loss - m.rmse) <= 1e-9 * (1.0 + std::abs(m.rmse))))
    out.push_back({"internal_external_mismatch", "internal/external mismatch: internal " +
                                                     format_number(internal_loss) + " vs external " +
                                                     format_number(m.rmse)});
  if (m.task == Task::regression && std::isfinite(m.r2) && m.r2 < kAnomalyR2)
    out.push_back({"r2_anomaly", "implausible R2 " + format_number(m.r2)});
  return out;
}

inline bool has_anomaly(const std::vector<SelfCheckFinding>& f) {
  return std::any_of(f.begin(), f.end(), [](const auto& x) { return x.code == "r2_anomaly"; });
}

}  // namespace lgo
