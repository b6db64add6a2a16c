// nids: command-line front end for the intrusion-detection pipeline.
//
//   nids synth --out data --counts 500,200,100,50,20 --features 12
//   nids pipeline --config data/pipeline.json --out run1
//   nids tune --config data/pipeline.json
//
// Stage subcommands (ingest .. evaluate) run the chain up to that stage,
// reusing cached upstream artifacts.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "nids/nids.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kStage = 3 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string input;
  bool verbose = false;
};

void add_common(CLI::App* sub, Common& c, bool needs_config) {
  auto* opt = sub->add_option("--config", c.config, "pipeline config (JSON)");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "master seed (overrides config)");
  sub->add_option("--out", c.out, "output directory (overrides config)");
  sub->add_flag("--verbose", c.verbose, "log per-stage counts and HPO trials");
}

nids::pipeline::PipelineConfig resolve(const Common& c) {
  auto cfg = nids::pipeline::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (!c.input.empty()) cfg.input = c.input;
  if (cfg.input.empty()) throw nids::ConfigError("no input CSV (set \"input\" in the config or pass --input)");
  return cfg;
}

int run_synth(const Common& c, const std::vector<std::size_t>& counts, std::size_t features, double separation,
              const std::string& name) {
  nids::SyntheticSpec spec;
  spec.rows_per_class = counts;
  spec.n_features = features;
  spec.separation = separation;
  if (c.seed) spec.seed = *c.seed;
  const auto s = nids::generate_synthetic(spec);
  const std::filesystem::path dir = c.out.empty() ? "." : c.out;
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  nids::write_csv(csv, s.data);
  nids::io::write_file_atomic(dir / (name + ".csv"), csv.str());
  nids::io::write_json(dir / (name + ".meta.json"), s.metadata);
  std::cerr << nlohmann::json{{"stage", "synth"}, {"status", "ok"}, {"rows", s.data.rows()},
                              {"path", (dir / (name + ".csv")).string()}}
                   .dump()
            << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network intrusion detection pipeline"};
  app.require_subcommand(1);
  Common common;

  const std::vector<std::string> stages{"ingest", "preprocess", "select", "reduce", "balance", "split", "train", "evaluate"};
  std::map<std::string, CLI::App*> stage_cmds;
  for (const auto& s : stages) {
    auto* sub = app.add_subcommand(s, "run the pipeline up to the " + s + " stage");
    add_common(sub, common, true);
    sub->add_option("--input", common.input, "input CSV (overrides config)");
    stage_cmds[s] = sub;
  }
  auto* pipe = app.add_subcommand("pipeline", "run every stage and write the report");
  add_common(pipe, common, true);
  pipe->add_option("--input", common.input, "input CSV (overrides config)");
  auto* tune = app.add_subcommand("tune", "compare default and TPE-tuned hyperparameters");
  add_common(tune, common, true);
  tune->add_option("--input", common.input, "input CSV (overrides config)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic labelled flow dataset");
  add_common(synth, common, false);
  std::vector<std::size_t> counts{500, 200, 100, 50, 20};
  std::size_t features = 12;
  double separation = 3.0;
  std::string name = "synthetic";
  std::size_t n_classes = 0;
  synth->add_option("--classes", n_classes, "number of classes (first N of --counts)");
  synth->add_option("--counts", counts, "rows per class")->delimiter(',');
  synth->add_option("--features", features, "number of features");
  synth->add_option("--separation", separation, "scale of class-centre spread");
  synth->add_option("--name", name, "output file stem");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) {
      if (n_classes) {
        if (n_classes > counts.size()) throw nids::ConfigError("--classes exceeds the number of --counts entries");
        counts.resize(n_classes);
      }
      return run_synth(common, counts, features, separation, name);
    }
    const auto cfg = resolve(common);
    nids::pipeline::Runner runner(cfg, &std::cerr, common.verbose);
    nids::pipeline::RunSummary summary;
    if (tune->parsed()) {
      summary = runner.run_hpo_comparison();
    } else if (pipe->parsed()) {
      summary = runner.run();
    } else {
      for (const auto& [s, sub] : stage_cmds)
        if (sub->parsed()) summary = runner.run(s);
    }
    std::cout << summary.to_json().dump(2) << '\n';
    if (summary.report) std::cout << summary.report->text;
    return kOk;
  } catch (const nids::StageError& e) {
    std::cerr << nlohmann::json{{"status", "failed"}, {"stage", e.stage()}, {"error", e.what()}}.dump() << '\n';
    return e.data_error() ? kData : kStage;
  } catch (const nids::ConfigError& e) {
    std::cerr << nlohmann::json{{"status", "usage"}, {"error", e.what()}}.dump() << '\n';
    return kUsage;
  } catch (const nids::DataError& e) {
    std::cerr << nlohmann::json{{"status", "data"}, {"error", e.what()}}.dump() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"status", "failed"}, {"error", e.what()}}.dump() << '\n';
    return kStage;
  }
}
