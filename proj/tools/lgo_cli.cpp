// Command-line front end: run, gen-synth, audit, simplify, plotdata.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lgo/audit.hpp"
#include "lgo/csv.hpp"
#include "lgo/data.hpp"
#include "lgo/pipeline.hpp"
#include "lgo/simplify.hpp"
#include "lgo/synth.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitSelfCheck = 4;

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t used = 0;
      const auto v = std::stoull(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw lgo::ConfigError("invalid seed '" + tok + "'");
    }
  }
  if (out.empty()) throw lgo::ConfigError("empty seed list");
  return out;
}

std::size_t env_workers() {
  if (const char* w = std::getenv("LGO_WORKERS")) {
    try {
      const long v = std::stol(w);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw lgo::ConfigError("LGO_WORKERS must be a positive integer");
  }
  return 1;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw lgo::DataError("cannot write " + p.string());
  f << text;
}

struct RunArgs {
  std::string data, target = "y", task = "regression", ops = "hard", seeds, out, anchors;
  std::size_t pop = 800, gen = 100, top_k = 100;
  double cv_weight = 0.0, test_fraction = 0.2;
  int refine_steps = 60;
};

int cmd_run(const RunArgs& a) {
  lgo::RunConfig cfg;
  cfg.dataset_path = a.data;
  cfg.dataset_name = fs::path(a.data).stem().string();
  cfg.target = a.target;
  cfg.task = lgo::parse_task(a.task);
  cfg.search.operator_set = lgo::parse_operator_set(a.ops);
  cfg.search.pop = a.pop;
  cfg.search.gen = a.gen;
  cfg.search.top_k = a.top_k;
  cfg.search.cv.weight = a.cv_weight;
  cfg.search.workers = env_workers();
  cfg.refine.steps = a.refine_steps;
  cfg.test_fraction = a.test_fraction;
  if (!a.seeds.empty()) cfg.seeds = parse_seeds(a.seeds);
  cfg.search.validate();
  cfg.refine.validate();
  if (!a.anchors.empty()) cfg.anchors = lgo::load_anchors(a.anchors);

  const lgo::Dataset data = lgo::load_csv(a.data, a.target, cfg.task);
  if (data.dropped_rows) std::cerr << "dropped " << data.dropped_rows << " rows with missing values\n";
  if (cfg.anchors)
    for (const auto& w : lgo::coverage(*cfg.anchors, data.feature_names).warnings()) std::cerr << "warning: " << w << "\n";

  const lgo::RunResult res = lgo::run_experiment(data, cfg);
  lgo::write_run(res, a.out);
  for (const auto& s : res.seeds) {
    if (s.models.empty()) continue;
    std::cout << "seed " << s.seed;
    for (const auto& [name, value] : s.top1().test.values()) std::cout << " " << name << "=" << lgo::format_number(value);
    std::cout << " gates=" << s.top1().gates << "\n";
    for (const auto& w : s.stats.warnings()) std::cerr << "warning: seed " << s.seed << ": " << w << "\n";
  }
  if (res.audit)
    std::cout << "audit: " << res.audit->green << " green, " << res.audit->yellow << " yellow, " << res.audit->red
              << " red\n";
  if (res.self_check_failed()) {
    for (const auto& s : res.seeds)
      if (s.self_check_failed())
        for (const auto& f : s.top1().findings)
          std::cerr << "self-check failed (seed " << s.seed << "): " << f.code << ": " << f.detail << "\n";
    return kExitSelfCheck;
  }
  return kExitOk;
}

struct SynthArgs {
  std::string kind = "step1d", out;
  std::size_t n = 2000;
  double noise = 0.1, c = 1.0;
  std::uint64_t seed = 1;
};

int cmd_gen_synth(const SynthArgs& a) {
  lgo::SynthConfig cfg;
  cfg.kind = lgo::parse_synth_kind(a.kind);
  cfg.n = a.n;
  cfg.noise = a.noise;
  cfg.c = a.c;
  cfg.seed = a.seed;
  const lgo::SynthData s = lgo::generate_synth(cfg);
  const fs::path out(a.out);
  const fs::path stem = out.parent_path() / out.stem();
  write_text(out, lgo::dataset_to_csv(s.data));
  write_text(stem.string() + ".truth.json", s.truth.to_json().dump(2) + "\n");
  write_text(stem.string() + ".anchors.yaml", lgo::synth_anchors_yaml(s.truth));
  std::cout << "wrote " << out.string() << " (" << s.data.rows() << " rows)\n";
  return kExitOk;
}

struct AuditArgs {
  std::string thresholds, anchors, out;
};

/// Accepts any CSV with `feature` and `b_raw` columns; `invertible` is optional.
int cmd_audit(const AuditArgs& a) {
  const lgo::CsvTable t = lgo::read_csv(a.thresholds);
  const int feature = t.require_column("feature", a.thresholds);
  const int braw = t.require_column("b_raw", a.thresholds);
  const int inv = t.column("invertible");
  std::vector<lgo::ThresholdRow> rows;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    lgo::ThresholdRow row;
    row.feature = t.rows[r][static_cast<std::size_t>(feature)];
    row.b_raw = lgo::parse_double(t.rows[r][static_cast<std::size_t>(braw)],
                                  a.thresholds + " row " + std::to_string(r + 1) + " column 'b_raw'");
    row.invertible = inv < 0 || t.rows[r][static_cast<std::size_t>(inv)] == "1";
    rows.push_back(std::move(row));
  }
  const lgo::AnchorCatalogue cat = lgo::load_anchors(a.anchors);
  const lgo::AuditReport rep = lgo::audit_thresholds(rows, cat);
  const fs::path out = a.out.empty() ? fs::path("threshold_audit.csv") : fs::path(a.out);
  write_text(out, lgo::threshold_audit_csv(rep));
  for (const auto& r : rep.rows) {
    std::cout << r.feature << ": median " << lgo::format_threshold(r.median, r.unit);
    if (r.anchor) std::cout << " anchor " << lgo::format_number(*r.anchor);
    if (std::isfinite(r.rel_dev)) std::cout << " rel_dev " << lgo::format_fixed(100.0 * r.rel_dev, 2) << "%";
    std::cout << " " << lgo::band_name(r.band) << "\n";
  }
  std::cout << "audit: " << rep.green << " green, " << rep.yellow << " yellow, " << rep.red << " red\n";
  return kExitOk;
}

struct SimplifyArgs {
  std::string pool, data, target = "y", task = "regression", stats, out;
};

/// Re-simplifies the expressions of a top-k or pool export on a dataset
/// given in natural units.
int cmd_simplify(const SimplifyArgs& a) {
  const lgo::Dataset data = lgo::load_csv(a.data, a.target, lgo::parse_task(a.task));
  const lgo::FeatureStats stats =
      a.stats.empty() ? lgo::fit_feature_stats(data) : lgo::stats_from_table(lgo::read_csv(a.stats), a.stats);
  const lgo::Dataset z = lgo::apply_stats(data, stats);
  const lgo::CsvTable pool = lgo::read_csv(a.pool);
  int col = pool.column("raw");
  if (col < 0) col = pool.column("expression");
  if (col < 0) throw lgo::DataError(a.pool + ": missing column 'raw' (or 'expression'); found: " + [&] {
    std::string h;
    for (const auto& c : pool.header) h += (h.empty() ? "" : ", ") + c;
    return h;
  }());
  lgo::CsvWriter w({"rank", "raw", "simplified", "equivalence_flag", "max_abs_dev", "display"});
  std::size_t flagged = 0;
  for (std::size_t r = 0; r < pool.rows.size(); ++r) {
    const std::string& raw = pool.rows[r][static_cast<std::size_t>(col)];
    lgo::Expression e;
    try {
      e = lgo::parse_expr(raw, data.feature_names);
    } catch (const lgo::ParseError& err) {
      throw lgo::DataError(a.pool + " row " + std::to_string(r + 1) + ": " + err.what());
    }
    const lgo::SimplifyResult s = lgo::simplify(e, z);
    flagged += !s.equivalent;
    w.add(r + 1, raw, s.text, s.equivalent ? 1 : 0, s.max_abs_dev,
          lgo::display_format(s.tree, data.feature_names, data.units, &stats));
  }
  if (a.out.empty())
    std::cout << w.str();
  else
    write_text(a.out, w.str());
  std::cerr << pool.rows.size() << " expressions, " << flagged << " flagged\n";
  return kExitOk;
}

struct PlotArgs {
  std::vector<std::string> runs;
  std::string out;
};

/// Tidy inputs for the violin, Pareto, gate-usage and threshold-alignment
/// figures. Rendering is left to external tools.
int cmd_plotdata(const PlotArgs& a) {
  lgo::CsvWriter violin({"run", "dataset", "method", "experiment", "seed", "metric", "value"});
  lgo::CsvWriter pareto({"run", "seed", "cv_loss", "complexity", "gates"});
  lgo::CsvWriter usage({"run", "dataset", "experiment", "top_k", "usage_pct", "median_gates", "complexity_median",
                        "cv_loss_median"});
  lgo::CsvWriter align({"run", "feature", "unit", "n", "median", "q1", "q3", "anchor", "rel_dev", "band"});
  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  for (const auto& run : a.runs) {
    const fs::path dir(run);
    const std::string tag = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    auto table = [&](const std::string& file) { return lgo::read_csv((dir / file).string()); };
    auto copy = [&](const lgo::CsvTable& t, const std::vector<std::string>& cols, lgo::CsvWriter& w,
                    const std::string& name) {
      std::vector<int> idx;
      for (const auto& c : cols) idx.push_back(t.require_column(c, name));
      for (const auto& r : t.rows) {
        std::vector<std::string> out{tag};
        for (int i : idx) out.push_back(r[static_cast<std::size_t>(i)]);
        w.row(out);
      }
    };
    copy(table("overall_metrics.csv"), {"dataset", "method", "experiment", "seed", "metric", "value"}, violin,
         (dir / "overall_metrics.csv").string());
    copy(table("gating_usage.csv"), lgo::gating_usage_header(), usage, (dir / "gating_usage.csv").string());
    if (fs::exists(dir / "threshold_audit.csv")) {
      copy(table("threshold_audit.csv"), {"feature", "unit", "n", "median", "q1", "q3", "anchor", "rel_dev", "band"},
           align, (dir / "threshold_audit.csv").string());
    }
    std::vector<fs::path> seed_dirs;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_directory() && entry.path().filename().string().starts_with("seed_")) seed_dirs.push_back(entry.path());
    std::sort(seed_dirs.begin(), seed_dirs.end());
    for (const auto& sd : seed_dirs) {
      const std::string seed = sd.filename().string().substr(5);
      const auto t = lgo::read_csv((sd / "pool.csv").string());
      const int l = t.require_column("cv_loss", (sd / "pool.csv").string());
      const int c = t.require_column("complexity", (sd / "pool.csv").string());
      const int g = t.require_column("gates", (sd / "pool.csv").string());
      const int f = t.column("on_front");
      for (const auto& r : t.rows) {
        if (f >= 0 && r[static_cast<std::size_t>(f)] != "1") continue;
        pareto.row({tag, seed, r[static_cast<std::size_t>(l)], r[static_cast<std::size_t>(c)], r[static_cast<std::size_t>(g)]});
      }
    }
    index.push_back({{"run", tag}, {"path", run}});
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  write_text(out / "violin.csv", violin.str());
  write_text(out / "pareto.csv", pareto.str());
  write_text(out / "gate_usage.csv", usage.str());
  write_text(out / "threshold_alignment.csv", align.str());
  nlohmann::ordered_json j;
  j["runs"] = index;
  j["files"] = {"violin.csv", "pareto.csv", "gate_usage.csv", "threshold_alignment.csv"};
  write_text(out / "plotdata.json", j.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic regression with logistic-gated operators"};
  app.require_subcommand(1);

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run an experiment over seeds and write exports");
  r->add_option("--data", run.data, "CSV dataset")->required();
  r->add_option("--target", run.target, "Target column")->capture_default_str();
  r->add_option("--task", run.task, "regression or binary")->capture_default_str();
  r->add_option("--ops", run.ops, "Operator set: base, soft or hard")->capture_default_str();
  r->add_option("--seeds", run.seeds, "Comma-separated seeds (default 1,2,3,5,8,13,21,34,55,89)");
  r->add_option("--pop", run.pop, "Population size")->capture_default_str();
  r->add_option("--gen", run.gen, "Generations")->capture_default_str();
  r->add_option("--top-k", run.top_k, "Models kept per seed")->capture_default_str();
  r->add_option("--cv-weight", run.cv_weight, "Weight of the fold term in the CV proxy")->capture_default_str();
  r->add_option("--test-fraction", run.test_fraction, "Held-out share")->capture_default_str();
  r->add_option("--refine-steps", run.refine_steps, "Coordinate-descent cycles")->capture_default_str();
  r->add_option("--out", run.out, "Output directory")->required();
  r->add_option("--anchors", run.anchors, "Anchor YAML file");

  SynthArgs synth;
  auto* g = app.add_subcommand("gen-synth", "Generate a synthetic benchmark with known thresholds");
  g->add_option("--kind", synth.kind, "step1d, two_gate, smooth or and2")->capture_default_str();
  g->add_option("--n", synth.n, "Rows")->capture_default_str();
  g->add_option("--noise", synth.noise, "Noise sd as a fraction of the signal")->capture_default_str();
  g->add_option("--c", synth.c, "Signal amplitude")->capture_default_str();
  g->add_option("--seed", synth.seed, "Seed")->capture_default_str();
  g->add_option("--out", synth.out, "Output CSV path")->required();

  AuditArgs audit;
  auto* au = app.add_subcommand("audit", "Score exported thresholds against anchors");
  au->add_option("--thresholds", audit.thresholds, "CSV with feature and b_raw columns")->required();
  au->add_option("--anchors", audit.anchors, "Anchor YAML file")->required();
  au->add_option("--out", audit.out, "Output CSV (default threshold_audit.csv)");

  SimplifyArgs simp;
  auto* s = app.add_subcommand("simplify", "Re-simplify exported expressions with equivalence flags");
  s->add_option("--pool", simp.pool, "topk_expressions.csv or pool.csv")->required();
  s->add_option("--data", simp.data, "Dataset in natural units")->required();
  s->add_option("--target", simp.target, "Target column")->capture_default_str();
  s->add_option("--task", simp.task, "regression or binary")->capture_default_str();
  s->add_option("--stats", simp.stats, "stats.csv with training statistics");
  s->add_option("--out", simp.out, "Output CSV (default stdout)");

  PlotArgs plot;
  auto* p = app.add_subcommand("plotdata", "Emit tidy CSV/JSON inputs for figures");
  p->add_option("--runs", plot.runs, "Run output directories")->required()->expected(1, -1);
  p->add_option("--out", plot.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*r) return cmd_run(run);
    if (*g) return cmd_gen_synth(synth);
    if (*au) return cmd_audit(audit);
    if (*s) return cmd_simplify(simp);
    if (*p) return cmd_plotdata(plot);
  } catch (const lgo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const lgo::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const lgo::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitData;
  } catch (const YAML::Exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}
