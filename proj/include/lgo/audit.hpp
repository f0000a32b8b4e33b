// Anchor catalogues, threshold extraction and inversion to natural units,
// traffic-light scoring, gate usage, and aggregation across seeds.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "lgo/data.hpp"
#include "lgo/eval.hpp"
#include "lgo/expr.hpp"
#include "lgo/metrics.hpp"

namespace lgo {

inline constexpr const char* kStdUnit = "(std)";

struct Anchor {
  std::string feature;
  std::string unit;
  std::optional<double> anchor;
  std::string note;

  /// Scored against the traffic-light bands.
  bool scorable() const { return anchor.has_value() && unit != kStdUnit; }
};

class AnchorCatalogue {
 public:
  void add(Anchor a) {
    if (find(a.feature) != nullptr) throw DataError("duplicate anchor feature '" + a.feature + "'");
    entries_.push_back(std::move(a));
  }

  const Anchor* find(std::string_view feature) const {
    for (const auto& a : entries_)
      if (a.feature == feature) return &a;
    return nullptr;
  }

  const std::vector<Anchor>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Unit per feature name, empty when the catalogue has no entry.
  std::vector<std::string> units_for(const FeatureNames& names) const {
    std::vector<std::string> out;
    for (const auto& n : names) {
      const Anchor* a = find(n);
      out.push_back(a ? a->unit : "");
    }
    return out;
  }

 private:
  std::vector<Anchor> entries_;
};

/// Parses the `feature: {unit, anchor, note}` schema. `unit` is required;
/// `anchor` may be omitted for features audited for stability only.
inline AnchorCatalogue parse_anchors(const std::string& text, std::string_view source = "<anchors>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw DataError(std::string(source) + ": " + e.what());
  }
  AnchorCatalogue cat;
  if (root.IsNull()) return cat;
  if (!root.IsMap()) throw DataError(std::string(source) + ": top level must be a mapping of feature names");
  for (const auto& kv : root) {
    Anchor a;
    a.feature = kv.first.as<std::string>();
    const std::string where = std::string(source) + ": feature '" + a.feature + "'";
    const YAML::Node& body = kv.second;
    if (!body.IsMap()) throw DataError(where + " must map to {unit, anchor, note}");
    if (!body["unit"] || body["unit"].IsNull()) throw DataError(where + " is missing 'unit'");
    a.unit = body["unit"].as<std::string>();
    if (body["anchor"] && !body["anchor"].IsNull()) {
      const std::string raw = body["anchor"].as<std::string>();
      a.anchor = parse_double(raw, where + " anchor");
    }
    if (body["note"] && !body["note"].IsNull()) a.note = body["note"].as<std::string>();
    cat.add(std::move(a));
  }
  return cat;
}

inline AnchorCatalogue load_anchors(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open anchors file " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_anchors(text, path);
}

struct CoverageReport {
  std::vector<std::string> anchored;    // dataset features with a scorable anchor
  std::vector<std::string> unanchored;  // remaining dataset features
  std::vector<std::string> unknown;     // catalogue entries absent from the dataset

  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    for (const auto& u : unknown) out.push_back("anchor feature '" + u + "' not found in dataset");
    return out;
  }
};

inline CoverageReport coverage(const AnchorCatalogue& cat, const FeatureNames& features) {
  CoverageReport r;
  for (const auto& f : features) {
    const Anchor* a = cat.find(f);
    (a && a->scorable() ? r.anchored : r.unanchored).push_back(f);
  }
  for (const auto& a : cat.entries())
    if (std::find(features.begin(), features.end(), a.feature) == features.end()) r.unknown.push_back(a.feature);
  return r;
}

// ---------------------------------------------------------------------------
// Threshold extraction

struct ThresholdRow {
  std::string feature;    // feature name, or the gated subexpression / input list
  std::string gate_type;  // primitive name
  double b_z = 0.0;
  double b_raw = 0.0;
  std::string unit;
  bool invertible = true;
  std::uint64_t seed = 0;
  std::size_t model = 0;  // rank of the owning model within its seed
};

/// One row per gate occurrence, in prefix order. Gates on a bare feature are
/// inverted with the feature's training statistics. Gates on a subexpression
/// use the training-split mean and deviation of that subexpression. Multi-input
/// gates are invertible only when every input is the same bare feature.
inline std::vector<ThresholdRow> extract_thresholds(const Expression& e, const FeatureStats& stats,
                                                    const Dataset& z_train, const std::vector<std::string>& units = {}) {
  std::vector<ThresholdRow> rows;
  const FeatureNames& names = z_train.feature_names;
  auto unit_of = [&](int j) { return static_cast<std::size_t>(j) < units.size() ? units[static_cast<std::size_t>(j)] : ""; };
  for (std::size_t g : gate_indices(e)) {
    const Primitive& p = primitive(e.nodes[g].op);
    ThresholdRow row;
    row.gate_type = std::string(p.name);
    row.b_z = e.nodes[e.gate_thr_index(g)].value;
    const auto kids = e.children(g);
    const int inputs = p.gated_inputs();
    std::vector<int> feats;
    std::vector<std::string> labels;
    for (int k = 0; k < inputs; ++k) {
      const std::size_t c = kids[static_cast<std::size_t>(k)];
      const Node& n = e.nodes[c];
      feats.push_back(n.kind == NodeKind::feature ? n.feature : -1);
      labels.push_back(print_expr(e.subtree(c), names));
    }
    const bool same_feature =
        feats[0] >= 0 && std::all_of(feats.begin(), feats.end(), [&](int f) { return f == feats[0]; });
    if (same_feature && p.op != Op::lgo_pair) {
      const std::string& name = names.at(static_cast<std::size_t>(feats[0]));
      row.feature = name;
      row.unit = unit_of(feats[0]);
      row.b_raw = invert_threshold(row.b_z, name, stats);
    } else if (inputs == 1) {
      row.feature = labels[0];
      const SubexprStats s = fit_subexpr_stats(e.subtree(kids[0]), z_train);
      row.invertible = s.invertible;
      row.b_raw = s.invertible ? s.mu + s.sigma * row.b_z : kNaN;
    } else {
      std::string joined;
      for (const auto& l : labels) joined += (joined.empty() ? "" : "|") + l;
      row.feature = joined;
      row.invertible = false;
      row.b_raw = kNaN;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Traffic-light audit

enum class Band { green, yellow, red, none };

inline const char* band_name(Band b) {
  switch (b) {
    case Band::green: return "green";
    case Band::yellow: return "yellow";
    case Band::red: return "red";
    case Band::none: return "none";
  }
  return "none";
}

inline Band band_for(double rel_dev) {
  if (!std::isfinite(rel_dev)) return Band::none;
  if (rel_dev <= 0.10) return Band::green;
  if (rel_dev <= 0.20) return Band::yellow;
  return Band::red;
}

inline double relative_deviation(double value, double anchor) { return std::abs(value - anchor) / std::abs(anchor); }

/// Linear-interpolation quantile (type 7) of unsorted values.
inline double quantile(std::vector<double> v, double p) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

struct AuditRow {
  std::string feature;
  std::string unit;
  std::size_t n = 0;
  double median = kNaN;
  double q1 = kNaN;
  double q3 = kNaN;
  std::optional<double> anchor;
  double rel_dev = kNaN;
  Band band = Band::none;
  std::string note;
};

struct AuditReport {
  std::vector<AuditRow> rows;
  std::size_t green = 0;
  std::size_t yellow = 0;
  std::size_t red = 0;
};

/// Groups invertible rows by feature and scores every feature present in the
/// catalogue. Features marked "(std)" are summarised but never banded;
/// features without a catalogue entry are omitted.
inline AuditReport audit_thresholds(const std::vector<ThresholdRow>& rows, const AnchorCatalogue& cat) {
  std::map<std::string, std::vector<double>> grouped;
  for (const auto& r : rows)
    if (r.invertible && std::isfinite(r.b_raw)) grouped[r.feature].push_back(r.b_raw);
  AuditReport rep;
  for (const auto& a : cat.entries()) {
    auto it = grouped.find(a.feature);
    if (it == grouped.end()) continue;
    AuditRow row;
    row.feature = a.feature;
    row.unit = a.unit;
    row.n = it->second.size();
    row.median = median(it->second);
    row.q1 = quantile(it->second, 0.25);
    row.q3 = quantile(it->second, 0.75);
    row.anchor = a.anchor;
    if (a.unit == kStdUnit) {
      row.note = "standardized indicator; not banded";
    } else if (!a.anchor) {
      row.note = "no anchor";
    } else if (*a.anchor == 0.0) {
      row.note = "anchor is zero; relative deviation undefined";
    } else {
      row.rel_dev = relative_deviation(row.median, *a.anchor);
      row.band = band_for(row.rel_dev);
      if (row.band == Band::green) ++rep.green;
      if (row.band == Band::yellow) ++rep.yellow;
      if (row.band == Band::red) ++rep.red;
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Gate usage over a top-k pool

struct ModelSummary {
  std::size_t gates = 0;
  std::size_t complexity = 0;
  double cv_loss = 0.0;
  std::uint64_t seed = 0;
};

struct GateUsageRow {
  std::string dataset;
  std::string experiment;
  std::size_t top_k = 0;       // entries actually used
  double usage_pct = 0.0;      // share of models with at least one gate, in percent
  double median_gates = 0.0;   // zeros included
  double complexity_median = 0.0;
  double cv_loss_median = 0.0;
};

/// Ranks `pool` by cv_loss (ties by complexity) and summarises the best `k`.
inline GateUsageRow gate_usage(std::vector<ModelSummary> pool, std::size_t k, std::string dataset = "",
                               std::string experiment = "") {
  if (pool.empty()) throw std::invalid_argument("gate usage of an empty pool");
  std::stable_sort(pool.begin(), pool.end(), [](const ModelSummary& a, const ModelSummary& b) {
    if (a.cv_loss != b.cv_loss) return a.cv_loss < b.cv_loss;
    return a.complexity < b.complexity;
  });
  const std::size_t n = std::min(k, pool.size());
  GateUsageRow row;
  row.dataset = std::move(dataset);
  row.experiment = std::move(experiment);
  row.top_k = n;
  std::vector<double> gates, cx, loss;
  std::size_t with = 0;
  for (std::size_t i = 0; i < n; ++i) {
    with += pool[i].gates > 0;
    gates.push_back(static_cast<double>(pool[i].gates));
    cx.push_back(static_cast<double>(pool[i].complexity));
    loss.push_back(pool[i].cv_loss);
  }
  row.usage_pct = 100.0 * static_cast<double>(with) / static_cast<double>(n);
  row.median_gates = median(gates);
  row.complexity_median = median(cx);
  row.cv_loss_median = median(loss);
  return row;
}

// ---------------------------------------------------------------------------
// Aggregation across seeds

struct MetricRecord {
  std::string dataset;
  std::string method;
  std::string experiment;
  std::uint64_t seed = 0;
  std::string metric;
  double value = 0.0;
};

struct MetricSummary {
  std::string dataset;
  std::string method;
  std::string experiment;
  std::string metric;
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample deviation; 0 for a single seed
};

/// Mean and sample standard deviation per (dataset, method, experiment, metric),
/// in first-seen order. Non-finite values are skipped.
inline std::vector<MetricSummary> aggregate_seeds(const std::vector<MetricRecord>& records) {
  using Key = std::tuple<std::string, std::string, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<double>> values;
  for (const auto& r : records) {
    Key k{r.dataset, r.method, r.experiment, r.metric};
    if (!values.contains(k)) order.push_back(k);
    auto& v = values[k];
    if (std::isfinite(r.value)) v.push_back(r.value);
  }
  std::vector<MetricSummary> out;
  for (const auto& k : order) {
    const auto& v = values[k];
    MetricSummary s{std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k), v.size(), kNaN, kNaN};
    if (!v.empty()) {
      double m = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - m) * (x - m);
      s.mean = m;
      s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct FeatureThresholdSummary {
  std::string feature;
  std::string unit;
  std::size_t gate_cnt = 0;            // gate occurrences
  std::size_t models_with_gate = 0;    // distinct models with a gate on the feature
  double models_with_gate_pct = 0.0;   // of `total_models`
  double median = kNaN;
  double q1 = kNaN;
  double q3 = kNaN;
  std::string gate_type;               // most frequent gate primitive
};

/// Pools invertible rows from every seed and model. Sorted by gate count,
/// then feature name.
inline std::vector<FeatureThresholdSummary> aggregate_threshold_pools(const std::vector<ThresholdRow>& rows,
                                                                      std::size_t total_models) {
  struct Acc {
    std::string unit;
    std::vector<double> values;
    std::set<std::pair<std::uint64_t, std::size_t>> models;
    std::map<std::string, std::size_t> types;
  };
  std::map<std::string, Acc> acc;
  for (const auto& r : rows) {
    if (!r.invertible || !std::isfinite(r.b_raw)) continue;
    auto& a = acc[r.feature];
    a.unit = r.unit;
    a.values.push_back(r.b_raw);
    a.models.insert({r.seed, r.model});
    ++a.types[r.gate_type];
  }
  std::vector<FeatureThresholdSummary> out;
  for (auto& [feature, a] : acc) {
    FeatureThresholdSummary s;
    s.feature = feature;
    s.unit = a.unit;
    s.gate_cnt = a.values.size();
    s.models_with_gate = a.models.size();
    s.models_with_gate_pct =
        total_models ? 100.0 * static_cast<double>(a.models.size()) / static_cast<double>(total_models) : kNaN;
    s.median = median(a.values);
    s.q1 = quantile(a.values, 0.25);
    s.q3 = quantile(a.values, 0.75);
    std::size_t best = 0;
    for (const auto& [type, count] : a.types)
      if (count > best) {
        best = count;
        s.gate_type = type;
      }
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.gate_cnt != y.gate_cnt) return x.gate_cnt > y.gate_cnt;
    return x.feature < y.feature;
  });
  return out;
}

struct SeedThresholdSummary {
  std::uint64_t seed = 0;
  std::string feature;
  std::string unit;
  std::size_t n = 0;
  double median = kNaN;
  double q1 = kNaN;
  double q3 = kNaN;
};

/// Per-seed medians of invertible thresholds, ordered by seed then feature.
inline std::vector<SeedThresholdSummary> per_seed_thresholds(const std::vector<ThresholdRow>& rows) {
  std::map<std::pair<std::uint64_t, std::string>, std::pair<std::string, std::vector<double>>> acc;
  for (const auto& r : rows) {
    if (!r.invertible || !std::isfinite(r.b_raw)) continue;
    auto& a = acc[{r.seed, r.feature}];
    a.first = r.unit;
    a.second.push_back(r.b_raw);
  }
  std::vector<SeedThresholdSummary> out;
  for (const auto& [key, a] : acc)
    out.push_back({key.first, key.second, a.first, a.second.size(), median(a.second), quantile(a.second, 0.25),
                   quantile(a.second, 0.75)});
  return out;
}

}  // namespace lgo
