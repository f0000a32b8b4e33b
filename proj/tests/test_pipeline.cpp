#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "lgo/pipeline.hpp"
#include "lgo/synth.hpp"
#include "test_support.hpp"

namespace lgo {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("lgo_cli_test_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int cli(const std::string& args) const {
    const std::string cmd = std::string(LGO_CLI_PATH) + " " + args + " >" + (dir_ / "stdout.txt").string() + " 2>" +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }

  static std::string header(const fs::path& p) {
    std::string s = slurp(p);
    return s.substr(0, s.find('\n'));
  }

  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  std::string synth_and_small_run(const std::string& out) const {
    if (!fs::exists(dir_ / "step.csv"))
      EXPECT_EQ(cli("gen-synth --kind step1d --n 400 --seed 7 --out " + path("step.csv")), 0);
    return "run --data " + path("step.csv") + " --ops hard --seeds 1,2 --pop 40 --gen 4 --top-k 10 --anchors " +
           path("step.anchors.yaml") + " --out " + path(out);
  }

  std::map<std::string, std::string> tree_bytes(const fs::path& root) const {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
  }

  fs::path dir_;
};

TEST_F(Cli, UsageErrorsExitWithConfigCode) {
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("run --out " + path("o")), 2);
  EXPECT_EQ(cli("--help"), 0);
}

TEST_F(Cli, GenSynthWritesDataTruthAndAnchors) {
  ASSERT_EQ(cli("gen-synth --kind two_gate --n 300 --seed 3 --out " + path("tg.csv")), 0);
  EXPECT_TRUE(fs::exists(dir_ / "tg.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "tg.truth.json"));
  EXPECT_TRUE(fs::exists(dir_ / "tg.anchors.yaml"));
  const Dataset d = load_csv(path("tg.csv"), "y", Task::regression);
  EXPECT_EQ(d.rows(), 300u);
  EXPECT_NO_THROW(load_anchors(path("tg.anchors.yaml")));
  EXPECT_EQ(cli("gen-synth --kind wobble --out " + path("x.csv")), 2);
}

TEST_F(Cli, RunInputErrors) {
  ASSERT_EQ(cli("gen-synth --kind step1d --n 200 --out " + path("d.csv")), 0);
  EXPECT_EQ(cli("run --data " + path("missing.csv") + " --out " + path("o")), 3);
  EXPECT_EQ(cli("run --data " + path("d.csv") + " --target nope --out " + path("o")), 3);
  EXPECT_EQ(cli("run --data " + path("d.csv") + " --ops fancy --out " + path("o")), 2);
  EXPECT_EQ(cli("run --data " + path("d.csv") + " --pop 1 --out " + path("o")), 2);
  EXPECT_EQ(cli("run --data " + path("d.csv") + " --seeds 1,x --out " + path("o")), 2);
  EXPECT_NE(slurp(dir_ / "stderr.txt").find("seed"), std::string::npos);
}

TEST_F(Cli, RunExportsCanonicalHeaders) {
  ASSERT_EQ(cli(synth_and_small_run("run")), 0) << slurp(dir_ / "stderr.txt");
  const fs::path r = dir_ / "run";
  EXPECT_EQ(header(r / "overall_metrics.csv"), "dataset,method,experiment,seed,metric,value");
  EXPECT_EQ(header(r / "gating_usage.csv"),
            "dataset,experiment,top_k,usage_pct,median_gates,complexity_median,cv_loss_median");
  EXPECT_EQ(header(r / "thresholds_units.csv"),
            "dataset,feature,unit,gate_cnt,models_with_gate_N,models_with_gate_pct,median,q1,q3,gate_type");
  EXPECT_EQ(header(r / "threshold_audit.csv"), "feature,unit,n,median,q1,q3,anchor,rel_dev,band,note");
  EXPECT_EQ(header(r / "seed_1" / "topk_expressions.csv"), "rank,raw,simplified,equivalence_flag,cv_loss,complexity");
  EXPECT_EQ(header(r / "seed_2" / "stats.csv"), "feature,mu,sigma");
  const auto manifest = nlohmann::json::parse(slurp(r / "manifest.json"));
  EXPECT_EQ(manifest["seeds"], nlohmann::json::array({1, 2}));
  for (const auto& a : manifest["artifacts"])
    EXPECT_EQ(a["sha256"], sha256_hex(slurp(r / a["path"].get<std::string>()))) << a["path"];
  const CsvTable metrics = read_csv((r / "overall_metrics.csv").string());
  EXPECT_EQ(metrics.rows.size(), 2u * 3u);
}

TEST_F(Cli, RerunIsByteIdentical) {
  ASSERT_EQ(cli(synth_and_small_run("run")), 0);
  const auto first = tree_bytes(dir_ / "run");
  fs::remove_all(dir_ / "run");
  ASSERT_EQ(cli(synth_and_small_run("run")), 0);
  const auto second = tree_bytes(dir_ / "run");
  ASSERT_EQ(first.size(), second.size());
  for (const auto& [rel, bytes] : first) EXPECT_EQ(bytes, second.at(rel)) << rel;
}

TEST_F(Cli, AuditSimplifyAndPlotdata) {
  ASSERT_EQ(cli(synth_and_small_run("run")), 0);
  ASSERT_EQ(cli("audit --thresholds " + path("run/thresholds.csv") + " --anchors " + path("step.anchors.yaml") +
                " --out " + path("audit.csv")),
            0);
  EXPECT_EQ(header(dir_ / "audit.csv"), "feature,unit,n,median,q1,q3,anchor,rel_dev,band,note");
  ASSERT_EQ(cli("simplify --pool " + path("run/seed_1/topk_expressions.csv") + " --data " + path("step.csv") +
                " --stats " + path("run/seed_1/stats.csv") + " --out " + path("simp.csv")),
            0);
  const CsvTable simp = read_csv(path("simp.csv"));
  EXPECT_EQ(simp.header[3], "equivalence_flag");
  EXPECT_EQ(simp.rows.size(), read_csv(path("run/seed_1/topk_expressions.csv")).rows.size());
  ASSERT_EQ(cli("plotdata --runs " + path("run") + " --out " + path("plots")), 0);
  for (const char* f : {"violin.csv", "pareto.csv", "gate_usage.csv", "threshold_alignment.csv", "plotdata.json"})
    EXPECT_TRUE(fs::exists(dir_ / "plots" / f)) << f;
  EXPECT_EQ(cli("audit --thresholds " + path("nope.csv") + " --anchors " + path("step.anchors.yaml")), 3);
}

TEST(RunSeed, ModelsRankedAndThresholdsLinked) {
  SynthConfig sc;
  sc.kind = SynthKind::step1d;
  sc.n = 400;
  sc.seed = 11;
  const SynthData s = generate_synth(sc);
  RunConfig cfg;
  cfg.search.pop = 40;
  cfg.search.gen = 4;
  cfg.search.top_k = 15;
  const SeedRun run = run_seed(s.data, cfg, 3);
  ASSERT_FALSE(run.models.empty());
  EXPECT_LE(run.models.size(), 15u);
  EXPECT_EQ(run.train_rows + run.test_rows, 400u);
  for (std::size_t i = 0; i < run.models.size(); ++i) {
    EXPECT_EQ(run.models[i].rank, i + 1);
    if (i) EXPECT_LE(run.models[i - 1].test.rmse, run.models[i].test.rmse);
    EXPECT_GE(run.models[i].test.rmse, run.models[i].test.mae);
    EXPECT_TRUE(run.models[i].findings.empty());
  }
  std::size_t gates = 0;
  for (const auto& m : run.models) gates += m.gates;
  EXPECT_EQ(run.thresholds.size(), gates);
  for (const auto& row : run.thresholds) {
    EXPECT_EQ(row.seed, 3u);
    EXPECT_GE(row.model, 1u);
    EXPECT_LE(row.model, run.models.size());
  }
}

}  // namespace
}  // namespace lgo
