#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "nids/pipeline.hpp"
#include "nids/synthetic.hpp"

using namespace nids;
using namespace nids::pipeline;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("nids_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

PipelineConfig bundled(const fs::path& out) {
  auto cfg = load_config(fs::path(NIDS_DATA_DIR) / "pipeline.json");
  cfg.output_dir = out;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST(PipelineConfigJson, RoundTrip) {
  auto cfg = bundled("/tmp/x");
  cfg.hpo = HpoSettings{};
  cfg.hpo->space = default_search_space(ModelKind::cnn);
  cfg.pca.n_components = 3;
  const auto j = to_json(cfg);
  EXPECT_EQ(to_json(config_from_json(j)), j);
  EXPECT_TRUE(fs::path(cfg.input).is_absolute());
}

TEST(PipelineConfigJson, Rejects) {
  EXPECT_THROW(config_from_json({{"balance_order", "sideways"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"model", {{"kind", "svm"}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"split", {{"test_fraction", 1.5}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"seed", "abc"}}), ConfigError);
  TempDir t;
  write_text(t.path / "bad.json", "{ not json");
  EXPECT_THROW(load_config(t.path / "bad.json"), ConfigError);
}

TEST(SearchSpaces, DefaultsApply) {
  Rng rng(3);
  for (auto kind : {ModelKind::random_forest, ModelKind::cnn}) {
    const auto s = default_search_space(kind);
    s.validate();
    for (int i = 0; i < 20; ++i) {
      const auto c = hpo::sample_uniform(s, rng);
      if (kind == ModelKind::random_forest)
        EXPECT_NO_THROW(apply_config(RfParams{}, c).validate());
      else
        EXPECT_NO_THROW(apply_config(CnnParams{}, c).validate());
    }
  }
}

TEST(Pipeline, RunsAndCaches) {
  TempDir t;
  const auto cfg = bundled(t.path);
  std::ostringstream log;
  const auto first = Runner(cfg, &log).run();
  ASSERT_TRUE(first.metrics);
  EXPECT_GE(first.metrics->macro.f1, 0.9);
  EXPECT_EQ(first.stages.size(), 8u);
  EXPECT_EQ(first.stages[1].name, "split");
  EXPECT_EQ(first.test_synthetic_rows, 0u);
  for (const auto* f : {"ingest/manifest.json", "balance/partitions.cbor", "train/model.json", "evaluate/report.json",
                        "evaluate/report.txt", "select/feature_subset.json", "reduce/pca_model.json"})
    EXPECT_TRUE(fs::exists(t.path / f)) << f;
  const auto report = slurp(t.path / "evaluate" / "report.json");

  const auto second = Runner(cfg, &log).run();
  EXPECT_TRUE(second.all_cache_hits());
  EXPECT_EQ(slurp(t.path / "evaluate" / "report.json"), report);
  EXPECT_EQ(second.metrics->macro.f1, first.metrics->macro.f1);

  // changing a downstream parameter keeps the upstream cache
  auto changed = cfg;
  changed.rf.n_trees = 7;
  const auto third = Runner(changed, &log).run();
  for (std::size_t i = 0; i < 6; ++i) EXPECT_TRUE(third.stages[i].cache_hit) << third.stages[i].name;
  EXPECT_FALSE(third.stages[6].cache_hit);
  EXPECT_FALSE(third.stages[7].cache_hit);

  // log lines are JSON
  std::istringstream lines(log.str());
  std::string line;
  while (std::getline(lines, line)) EXPECT_NO_THROW((void)nlohmann::json::parse(line)) << line;
}

TEST(Pipeline, RunUntilStage) {
  TempDir t;
  const auto s = Runner(bundled(t.path), nullptr).run("select");
  EXPECT_EQ(s.stages.back().name, "select");
  EXPECT_FALSE(fs::exists(t.path / "reduce"));
  EXPECT_THROW(Runner(bundled(t.path), nullptr).run("nonsense"), ConfigError);
}

TEST(Pipeline, TogglesOff) {
  TempDir t;
  auto cfg = bundled(t.path);
  cfg.clean = cfg.normalize = cfg.fcbf.enabled = cfg.pca.enabled = cfg.balance.enabled = false;
  const auto s = Runner(cfg, nullptr).run();
  ASSERT_TRUE(s.metrics);
  const auto& train = *s.data.train;
  EXPECT_EQ(train.cols(), 12u);
  for (const auto& p : train.provenance) EXPECT_FALSE(p.synthetic);
}

TEST(Pipeline, BalanceOrders) {
  TempDir t;
  auto cfg = bundled(t.path / "after");
  const auto after = Runner(cfg, nullptr).run();
  EXPECT_EQ(after.test_synthetic_rows, 0u);
  std::size_t synth = 0;
  for (const auto& p : after.data.train->provenance) synth += p.synthetic;
  EXPECT_GT(synth, 0u);

  cfg.balance_order = BalanceOrder::before_split;
  cfg.output_dir = t.path / "before";
  const auto before = Runner(cfg, nullptr).run();
  EXPECT_EQ(before.stages[5].name, "split");
  EXPECT_GT(before.test_synthetic_rows, 0u);
  EXPECT_EQ(before.report->json["balance_order"], "before_split");
}

TEST(Pipeline, BadInputFailsAtIngest) {
  TempDir t;
  write_text(t.path / "bad.csv", "a,b,Label\n1,2,x\n3\n");
  auto cfg = bundled(t.path / "out");
  cfg.input = t.path / "bad.csv";
  try {
    Runner(cfg, nullptr).run();
    FAIL() << "expected a stage error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "ingest");
    EXPECT_TRUE(e.data_error());
  }
  cfg.input = t.path / "missing.csv";
  EXPECT_THROW(Runner(cfg, nullptr).run(), StageError);
}

TEST(Pipeline, HpoComparison) {
  TempDir t;
  auto cfg = bundled(t.path);
  cfg.hpo = HpoSettings{};
  cfg.hpo->budget = 4;
  cfg.hpo->tpe.n_startup = 2;
  const auto s = Runner(cfg, nullptr).run_hpo_comparison();
  ASSERT_TRUE(s.report);
  ASSERT_TRUE(s.tuning);
  EXPECT_EQ(s.tuning->history.size(), 4u);
  EXPECT_TRUE(s.report->json.contains("comparison"));
  EXPECT_TRUE(fs::exists(t.path / "tune" / "history.jsonl"));
  EXPECT_NE(s.report->text.find("W/HOP"), std::string::npos);
}

TEST(Synthetic, Deterministic) {
  SyntheticSpec spec;
  spec.rows_per_class = {30, 10, 5};
  spec.n_features = 6;
  spec.seed = 11;
  const auto a = generate_synthetic(spec), b = generate_synthetic(spec);
  std::ostringstream sa, sb;
  write_csv(sa, a.data);
  write_csv(sb, b.data);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.data.rows(), 45u);
  EXPECT_EQ(a.data.class_counts(), (std::vector<std::size_t>{30, 10, 5}));
}
