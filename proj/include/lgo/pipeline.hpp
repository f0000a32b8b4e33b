// End-to-end experiment runs: per-seed search, refinement, simplification,
// metrics with self-checks, threshold extraction, aggregation and exports.
#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "lgo/audit.hpp"
#include "lgo/csv.hpp"
#include "lgo/data.hpp"
#include "lgo/eval.hpp"
#include "lgo/expr.hpp"
#include "lgo/metrics.hpp"
#include "lgo/refine.hpp"
#include "lgo/search.hpp"
#include "lgo/simplify.hpp"

namespace lgo {

struct RunConfig {
  std::string dataset_path;
  std::string dataset_name;
  std::string target = "y";
  std::string method = "LGO";
  Task task = Task::regression;
  SearchConfig search;
  RefineConfig refine;
  std::vector<std::uint64_t> seeds = canonical_seeds();
  double test_fraction = 0.2;
  double merge_tolerance = 0.05;
  std::optional<AnchorCatalogue> anchors;

  std::string experiment() const { return experiment_name(search.operator_set); }

  nlohmann::ordered_json snapshot() const {
    nlohmann::ordered_json j;
    j["target"] = target;
    j["task"] = task_name(task);
    j["ops"] = operator_set_name(search.operator_set);
    j["pop"] = search.pop;
    j["gen"] = search.gen;
    j["tourn"] = search.tourn;
    j["p_cx"] = search.p_cx;
    j["p_mut"] = search.p_mut;
    j["micro_mut_prob"] = search.micro_mut_prob;
    j["max_depth"] = search.max_depth;
    j["top_k"] = search.top_k;
    j["cv"] = {{"enabled", search.cv.enabled},
               {"weight", search.cv.weight},
               {"folds", search.cv.folds},
               {"subsample", search.cv.subsample},
               {"warmup", search.cv.warmup}};
    j["refine"] = {{"steps", refine.steps},
                   {"step_a", refine.step_a},
                   {"step_b", refine.step_b},
                   {"shrink", refine.shrink},
                   {"min_step", refine.min_step}};
    j["test_fraction"] = test_fraction;
    j["merge_tolerance"] = merge_tolerance;
    return j;
  }
};

struct ExportedModel {
  std::size_t rank = 0;
  Expression raw;
  std::string raw_text;
  std::string simplified;
  std::string display;
  bool equivalent = true;
  bool merge_rolled_back = false;
  double cv_loss = 0.0;
  std::size_t complexity = 0;
  std::size_t gates = 0;
  double train_rmse = 0.0;
  MetricReport test;
  std::vector<SelfCheckFinding> findings;
};

struct SeedRun {
  std::uint64_t seed = 0;
  FeatureStats stats;
  std::vector<ExportedModel> models;  // ranked by test RMSE after refit; models[0] is top-1
  std::vector<ThresholdRow> thresholds;
  std::vector<GenerationLog> log;
  std::vector<ParetoEntry> front;
  std::vector<ParetoEntry> archive;  // top-k by search objective
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;

  const ExportedModel& top1() const { return models.at(0); }
  bool self_check_failed() const { return !models.empty() && !models[0].findings.empty(); }
};

/// Runs one seed: split, standardize, evolve, refit and refine the top-k,
/// simplify, score on the test split and extract thresholds.
inline SeedRun run_seed(const Dataset& data, const RunConfig& cfg, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  auto [train, test] = split(data, seed, cfg.test_fraction);
  Standardized z = standardize(train, test);
  run.stats = z.stats;
  run.train_rows = train.rows();
  run.test_rows = test.rows();

  SearchConfig sc = cfg.search;
  sc.seed = seed;
  EvolveResult evo = evolve(sc, z.z_train);
  run.log = evo.log;
  run.front = evo.pool.front();
  run.archive = evo.pool.top();

  const auto units = data.units.empty() ? std::vector<std::string>(data.features(), "") : data.units;
  Evaluator ev;
  const auto& top = run.archive;
  std::vector<std::vector<ThresholdRow>> rows(top.size());
  for (std::size_t r = 0; r < top.size(); ++r) {
    ExportedModel m;
    const RefineResult refined = refit_and_refine(top[r].expr, z.z_train, cfg.refine);
    m.raw = refined.expr;
    m.raw_text = print_expr(m.raw, data.feature_names);
    m.cv_loss = top[r].cv_loss;
    m.complexity = complexity(m.raw);
    m.gates = gate_count(m.raw);
    m.train_rmse = rmse_loss(ev, m.raw, z.z_train);

    const auto pred = ev.forward(m.raw, z.z_test);
    const std::vector<double> y_hat(pred.begin(), pred.end());
    const double internal = rmse_of(y_hat, z.z_test.y);
    m.test = compute_metrics(data.task, z.z_test.y, y_hat);
    m.findings = self_check(m.test, internal);

    SimplifyResult s = simplify(m.raw, z.z_test);
    MergeResult merged = merge_near_duplicate_gates(s.tree, cfg.merge_tolerance, z.z_test);
    m.merge_rolled_back = merged.rolled_back;
    m.simplified = print_snode(merged.tree, data.feature_names);
    m.display = display_format(merged.tree, data.feature_names, units, &run.stats);
    m.equivalent = s.equivalent;

    rows[r] = extract_thresholds(m.raw, run.stats, z.z_train, units);
    run.models.push_back(std::move(m));
  }

  // Export ranking: test RMSE after refit, then complexity, then text.
  std::vector<std::size_t> order(run.models.size());
  std::iota(order.begin(), order.end(), 0);
  auto test_rmse = [&](std::size_t i) {
    const double v = run.models[i].test.rmse;
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ma = run.models[a];
    const auto& mb = run.models[b];
    return std::forward_as_tuple(test_rmse(a), ma.complexity, ma.raw_text) <
           std::forward_as_tuple(test_rmse(b), mb.complexity, mb.raw_text);
  });
  std::vector<ExportedModel> ranked;
  ranked.reserve(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    ExportedModel m = std::move(run.models[order[k]]);
    m.rank = k + 1;
    for (auto& row : rows[order[k]]) {
      row.seed = seed;
      row.model = m.rank;
      run.thresholds.push_back(std::move(row));
    }
    ranked.push_back(std::move(m));
  }
  run.models = std::move(ranked);
  return run;
}

struct RunResult {
  RunConfig config;
  std::vector<SeedRun> seeds;
  std::vector<MetricRecord> metrics;  // top-1 test metrics per seed
  std::vector<MetricSummary> aggregate;
  GateUsageRow usage;                 // every seed's top-k pooled
  std::vector<GateUsageRow> usage_per_seed;
  std::vector<FeatureThresholdSummary> thresholds;
  std::vector<SeedThresholdSummary> thresholds_per_seed;
  std::optional<AuditReport> audit;
  std::optional<CoverageReport> coverage;

  bool self_check_failed() const {
    return std::any_of(seeds.begin(), seeds.end(), [](const SeedRun& s) { return s.self_check_failed(); });
  }
};

inline std::vector<ModelSummary> model_summaries(const SeedRun& s) {
  std::vector<ModelSummary> out;
  for (const auto& m : s.models) out.push_back({m.gates, m.complexity, m.cv_loss, s.seed});
  return out;
}

inline RunResult run_experiment(const Dataset& data, const RunConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
  RunResult res;
  res.config = cfg;
  Dataset d = data;
  if (cfg.anchors) {
    const auto units = cfg.anchors->units_for(d.feature_names);
    for (std::size_t j = 0; j < d.features(); ++j)
      if (!units[j].empty()) d.units.at(j) = units[j];
  }
  std::vector<ModelSummary> all_models;
  std::vector<ThresholdRow> all_rows;
  for (auto seed : cfg.seeds) {
    SeedRun s = run_seed(d, cfg, seed);
    if (!s.models.empty()) {
      for (const auto& [name, value] : s.top1().test.values())
        res.metrics.push_back({cfg.dataset_name, cfg.method, cfg.experiment(), seed, name, value});
      auto ms = model_summaries(s);
      res.usage_per_seed.push_back(gate_usage(ms, cfg.search.top_k, cfg.dataset_name, cfg.experiment()));
      all_models.insert(all_models.end(), ms.begin(), ms.end());
    }
    all_rows.insert(all_rows.end(), s.thresholds.begin(), s.thresholds.end());
    res.seeds.push_back(std::move(s));
  }
  res.aggregate = aggregate_seeds(res.metrics);
  if (!all_models.empty()) res.usage = gate_usage(all_models, all_models.size(), cfg.dataset_name, cfg.experiment());
  res.thresholds = aggregate_threshold_pools(all_rows, all_models.size());
  res.thresholds_per_seed = per_seed_thresholds(all_rows);
  if (cfg.anchors) {
    res.audit = audit_thresholds(all_rows, *cfg.anchors);
    res.coverage = coverage(*cfg.anchors, d.feature_names);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Exports

inline std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

inline std::string metric_csv(const std::vector<MetricRecord>& records) {
  CsvWriter w({"dataset", "method", "experiment", "seed", "metric", "value"});
  for (const auto& r : records) w.add(r.dataset, r.method, r.experiment, r.seed, r.metric, r.value);
  return w.str();
}

inline std::string aggregate_csv(const std::vector<MetricSummary>& rows) {
  CsvWriter w({"dataset", "method", "experiment", "metric", "n", "mean", "std"});
  for (const auto& r : rows) w.add(r.dataset, r.method, r.experiment, r.metric, r.n, r.mean, r.std);
  return w.str();
}

inline std::vector<std::string> gating_usage_header() {
  return {"dataset", "experiment", "top_k", "usage_pct", "median_gates", "complexity_median", "cv_loss_median"};
}

inline std::string gating_usage_csv(const std::vector<GateUsageRow>& rows) {
  CsvWriter w(gating_usage_header());
  for (const auto& r : rows)
    w.add(r.dataset, r.experiment, r.top_k, r.usage_pct, r.median_gates, r.complexity_median, r.cv_loss_median);
  return w.str();
}

inline std::vector<std::string> thresholds_units_header() {
  return {"dataset", "feature", "unit", "gate_cnt", "models_with_gate_N", "models_with_gate_pct", "median", "q1", "q3",
          "gate_type"};
}

inline std::string thresholds_units_csv(const std::string& dataset, const std::vector<FeatureThresholdSummary>& rows) {
  CsvWriter w(thresholds_units_header());
  for (const auto& r : rows)
    w.add(dataset, r.feature, r.unit, r.gate_cnt, r.models_with_gate, r.models_with_gate_pct, r.median, r.q1, r.q3,
          r.gate_type);
  return w.str();
}

inline std::vector<std::string> threshold_audit_header() {
  return {"feature", "unit", "n", "median", "q1", "q3", "anchor", "rel_dev", "band", "note"};
}

inline std::string threshold_audit_csv(const AuditReport& rep) {
  CsvWriter w(threshold_audit_header());
  for (const auto& r : rep.rows)
    w.add(r.feature, r.unit, r.n, r.median, r.q1, r.q3, r.anchor ? format_number(*r.anchor) : std::string(),
          std::isfinite(r.rel_dev) ? format_number(r.rel_dev) : std::string(), band_name(r.band), r.note);
  return w.str();
}

inline std::vector<std::string> threshold_rows_header() {
  return {"seed", "model", "feature", "gate_type", "b_z", "b_raw", "unit", "invertible"};
}

inline std::string threshold_rows_csv(const std::vector<ThresholdRow>& rows) {
  CsvWriter w(threshold_rows_header());
  for (const auto& r : rows) w.add(r.seed, r.model, r.feature, r.gate_type, r.b_z, r.b_raw, r.unit, r.invertible ? 1 : 0);
  return w.str();
}

/// Reads rows written by threshold_rows_csv.
inline std::vector<ThresholdRow> threshold_rows_from_table(const CsvTable& t, std::string_view name) {
  const int seed = t.require_column("seed", name), model = t.require_column("model", name);
  const int feature = t.require_column("feature", name), type = t.require_column("gate_type", name);
  const int bz = t.require_column("b_z", name), braw = t.require_column("b_raw", name);
  const int unit = t.require_column("unit", name), inv = t.require_column("invertible", name);
  std::vector<ThresholdRow> rows;
  for (const auto& r : t.rows) {
    auto at = [&](int c) { return r[static_cast<std::size_t>(c)]; };
    ThresholdRow row;
    row.seed = static_cast<std::uint64_t>(parse_double(at(seed), std::string(name) + " seed"));
    row.model = static_cast<std::size_t>(parse_double(at(model), std::string(name) + " model"));
    row.feature = at(feature);
    row.gate_type = at(type);
    row.b_z = parse_double(at(bz), std::string(name) + " b_z");
    row.b_raw = parse_double(at(braw), std::string(name) + " b_raw");
    row.unit = at(unit);
    row.invertible = at(inv) == "1";
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string per_seed_thresholds_csv(const std::vector<SeedThresholdSummary>& rows) {
  CsvWriter w({"seed", "feature", "unit", "n", "median", "q1", "q3"});
  for (const auto& r : rows) w.add(r.seed, r.feature, r.unit, r.n, r.median, r.q1, r.q3);
  return w.str();
}

inline std::vector<std::string> topk_header() {
  return {"rank", "raw", "simplified", "equivalence_flag", "cv_loss", "complexity"};
}

inline std::string topk_csv(const SeedRun& s) {
  CsvWriter w(topk_header());
  for (const auto& m : s.models) w.add(m.rank, m.raw_text, m.simplified, m.equivalent ? 1 : 0, m.cv_loss, m.complexity);
  return w.str();
}

inline std::string generations_csv(const SeedRun& s) {
  CsvWriter w({"generation", "best_cv_loss", "median_complexity", "gate_count_best"});
  for (const auto& g : s.log) w.add(g.generation, g.best_cv_loss, g.median_complexity, g.gate_count_best);
  return w.str();
}

/// Pareto front followed by the archive entries that are not on it.
inline std::string pool_csv(const SeedRun& s, const FeatureNames& names) {
  CsvWriter w({"expression", "cv_loss", "complexity", "seed", "generation", "gates", "on_front"});
  std::set<std::string> on_front;
  for (const auto& e : s.front) {
    w.add(print_expr(e.expr, names), e.cv_loss, e.complexity, e.seed, e.generation, gate_count(e.expr), 1);
    on_front.insert(e.key);
  }
  for (const auto& e : s.archive)
    if (!on_front.count(e.key))
      w.add(print_expr(e.expr, names), e.cv_loss, e.complexity, e.seed, e.generation, gate_count(e.expr), 0);
  return w.str();
}

inline std::string models_csv(const SeedRun& s) {
  CsvWriter w({"rank", "gates", "train_rmse", "test_rmse", "test_mae", "test_r2", "test_auroc", "test_auprc",
               "test_brier", "self_check", "merge_rolled_back", "display"});
  for (const auto& m : s.models) {
    std::string codes;
    for (const auto& f : m.findings) codes += (codes.empty() ? "" : ";") + f.code;
    w.add(m.rank, m.gates, m.train_rmse, m.test.rmse, m.test.mae, m.test.r2, m.test.auroc, m.test.auprc, m.test.brier,
          codes, m.merge_rolled_back ? 1 : 0, m.display);
  }
  return w.str();
}

inline std::string coverage_csv(const CoverageReport& c) {
  CsvWriter w({"feature", "status"});
  for (const auto& f : c.anchored) w.add(f, "anchored");
  for (const auto& f : c.unanchored) w.add(f, "unanchored");
  for (const auto& f : c.unknown) w.add(f, "not_in_dataset");
  return w.str();
}

/// Collects output files in memory, writes them, and records their hashes.
class ExportWriter {
 public:
  explicit ExportWriter(std::filesystem::path root) : root_(std::move(root)) {}

  void put(const std::string& rel, std::string content) { files_.emplace_back(rel, std::move(content)); }

  /// Writes every file plus manifest.json. Returns the manifest.
  nlohmann::ordered_json commit(nlohmann::ordered_json manifest) const {
    nlohmann::ordered_json artifacts = nlohmann::ordered_json::array();
    for (const auto& [rel, content] : files_) {
      const auto path = root_ / rel;
      std::filesystem::create_directories(path.parent_path());
      std::ofstream f(path, std::ios::binary);
      if (!f) throw DataError("cannot write " + path.string());
      f << content;
      artifacts.push_back({{"path", rel}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
    }
    manifest["artifacts"] = artifacts;
    std::filesystem::create_directories(root_);
    std::ofstream f(root_ / "manifest.json", std::ios::binary);
    if (!f) throw DataError("cannot write manifest.json");
    f << manifest.dump(2) << "\n";
    return manifest;
  }

 private:
  std::filesystem::path root_;
  std::vector<std::pair<std::string, std::string>> files_;
};

inline nlohmann::ordered_json write_run(const RunResult& res, const std::filesystem::path& out_dir) {
  const RunConfig& cfg = res.config;
  ExportWriter w(out_dir);
  w.put("overall_metrics.csv", metric_csv(res.metrics));
  w.put("aggregate_metrics.csv", aggregate_csv(res.aggregate));
  w.put("gating_usage.csv", gating_usage_csv({res.usage}));
  w.put("gating_usage_per_seed.csv", gating_usage_csv(res.usage_per_seed));
  w.put("thresholds_units.csv", thresholds_units_csv(cfg.dataset_name, res.thresholds));
  w.put("thresholds_per_seed.csv", per_seed_thresholds_csv(res.thresholds_per_seed));
  if (res.audit) w.put("threshold_audit.csv", threshold_audit_csv(*res.audit));
  if (res.coverage) w.put("anchor_coverage.csv", coverage_csv(*res.coverage));
  std::vector<ThresholdRow> all_rows;
  for (const auto& s : res.seeds) {
    const std::string dir = "seed_" + std::to_string(s.seed) + "/";
    w.put(dir + "topk_expressions.csv", topk_csv(s));
    w.put(dir + "models.csv", models_csv(s));
    w.put(dir + "generations.csv", generations_csv(s));
    w.put(dir + "pool.csv", pool_csv(s, s.stats.feature_names));
    w.put(dir + "thresholds.csv", threshold_rows_csv(s.thresholds));
    w.put(dir + "stats.csv", stats_to_csv(s.stats));
    all_rows.insert(all_rows.end(), s.thresholds.begin(), s.thresholds.end());
  }
  w.put("thresholds.csv", threshold_rows_csv(all_rows));

  nlohmann::ordered_json m;
  m["dataset"] = {{"path", cfg.dataset_path}, {"name", cfg.dataset_name}};
  m["method"] = cfg.method;
  m["experiment"] = cfg.experiment();
  m["seeds"] = cfg.seeds;
  m["config"] = cfg.snapshot();
  m["output_dir"] = out_dir.string();
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto& s : res.seeds)
    for (const auto& f : s.models.empty() ? std::vector<SelfCheckFinding>{} : s.top1().findings)
      checks.push_back({{"seed", s.seed}, {"code", f.code}, {"detail", f.detail}});
  m["self_check_failures"] = checks;
  return w.commit(m);
}

}  // namespace lgo
