#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nids/balance.hpp"
#include "nids/cnn.hpp"
#include "nids/error.hpp"
#include "nids/evaluate.hpp"
#include "nids/fcbf.hpp"
#include "nids/ingest.hpp"
#include "nids/io.hpp"
#include "nids/model.hpp"
#include "nids/normalize.hpp"
#include "nids/pca.hpp"
#include "nids/random.hpp"
#include "nids/random_forest.hpp"
#include "nids/tpe.hpp"

namespace nids::pipeline {

enum class BalanceOrder { before_split, after_split };

inline std::string to_string(BalanceOrder o) { return o == BalanceOrder::before_split ? "before_split" : "after_split"; }

struct FcbfSettings {
  bool enabled = true;
  double threshold = 0.01;
  int n_bins = 10;
};

struct PcaSettings {
  bool enabled = true;
  std::optional<std::size_t> n_components;
  double variance_fraction = 0.95;
};

struct BalanceSettings {
  bool enabled = true;
  BalanceConfig config;
};

struct HpoSettings {
  std::size_t budget = 30;
  hpo::TpeConfig tpe;
  std::optional<hpo::SearchSpace> space;  // defaults depend on the model kind
};

struct PipelineConfig {
  std::filesystem::path input;
  std::string label_column = "Label";
  std::uint64_t seed = 42;
  std::filesystem::path output_dir = "out";
  bool clean = true;
  bool normalize = true;
  FcbfSettings fcbf;
  PcaSettings pca;
  BalanceSettings balance;
  BalanceOrder balance_order = BalanceOrder::after_split;
  SplitSpec split;
  ModelKind model = ModelKind::random_forest;
  RfParams rf;
  CnnParams cnn;
  std::optional<HpoSettings> hpo;
};

inline hpo::SearchSpace default_search_space(ModelKind kind) {
  using namespace hpo;
  if (kind == ModelKind::random_forest)
    return {{{"n_trees", IntegerRange{10, 100}},
             {"max_depth", IntegerRange{2, 24}},
             {"min_samples_split", IntegerRange{2, 10}},
             {"features_per_split", Categorical{{"sqrt", "log2", "all"}}}}};
  return {{{"learning_rate", LogUniform{1e-3, 5e-2}},
           {"batch_size", IntegerRange{16, 64}},
           {"epochs", IntegerRange{5, 30}},
           {"n_filters", IntegerRange{4, 16}},
           {"kernel_size", Categorical{{"3", "5"}}}}};
}

// Overrides the hyperparameters named in a trial configuration.
inline RfParams apply_config(RfParams p, const hpo::Config& c) {
  if (auto it = c.find("n_trees"); it != c.end()) p.n_trees = static_cast<int>(hpo::as_int(it->second));
  if (auto it = c.find("max_depth"); it != c.end()) p.max_depth = static_cast<int>(hpo::as_int(it->second));
  if (auto it = c.find("min_samples_split"); it != c.end())
    p.min_samples_split = static_cast<int>(hpo::as_int(it->second));
  if (auto it = c.find("features_per_split"); it != c.end())
    p.features_per_split = features_per_split_from_string(hpo::as_string(it->second));
  return p;
}

inline CnnParams apply_config(CnnParams p, const hpo::Config& c) {
  auto num = [&](const char* k) { return hpo::as_int(c.at(k)); };
  if (c.count("learning_rate")) p.learning_rate = hpo::as_double(c.at("learning_rate"));
  if (c.count("batch_size")) p.batch_size = static_cast<int>(num("batch_size"));
  if (c.count("epochs")) p.epochs = static_cast<int>(num("epochs"));
  if (c.count("dense_units")) p.dense_units = static_cast<int>(num("dense_units"));
  if (c.count("dropout_rate")) p.dropout_rate = hpo::as_double(c.at("dropout_rate"));
  for (auto& b : p.conv_blocks) {
    if (c.count("n_filters")) b.n_filters = static_cast<int>(num("n_filters"));
    if (auto it = c.find("kernel_size"); it != c.end())
      b.kernel_size = std::holds_alternative<std::string>(it->second) ? std::stoi(hpo::as_string(it->second))
                                                                      : static_cast<int>(hpo::as_int(it->second));
  }
  return p;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["input"] = c.input.string();
  j["label_column"] = c.label_column;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["clean"] = {{"enabled", c.clean}};
  j["normalize"] = {{"enabled", c.normalize}};
  j["fcbf"] = {{"enabled", c.fcbf.enabled}, {"threshold", c.fcbf.threshold}, {"n_bins", c.fcbf.n_bins}};
  j["pca"] = {{"enabled", c.pca.enabled}, {"variance_fraction", c.pca.variance_fraction}};
  j["pca"]["n_components"] = c.pca.n_components ? nlohmann::json(*c.pca.n_components) : nlohmann::json(nullptr);
  const auto& b = c.balance.config;
  j["balance"] = {{"enabled", c.balance.enabled},
                  {"k", b.k ? nlohmann::json(*b.k) : nlohmann::json(nullptr)},
                  {"smote_k_neighbors", b.smote_k_neighbors},
                  {"policy", b.policy == TargetPolicy::match_majority ? "match_majority" : "explicit_factor"},
                  {"factor", b.factor}};
  j["balance_order"] = to_string(c.balance_order);
  j["split"] = {{"test_fraction", c.split.test_fraction},
                {"validation_fraction", c.split.validation_fraction},
                {"stratified", c.split.stratified}};
  j["model"] = {{"kind", to_string(c.model)}, {"random_forest", c.rf}, {"cnn", c.cnn}};
  if (c.hpo) {
    j["hpo"] = {{"budget", c.hpo->budget},
                {"gamma", c.hpo->tpe.gamma},
                {"n_startup", c.hpo->tpe.n_startup},
                {"n_candidates", c.hpo->tpe.n_candidates}};
    if (c.hpo->space) j["hpo"]["space"] = hpo::space_to_json(*c.hpo->space);
  }
  return j;
}

// Relative input/output paths are resolved against base_dir (normally the config file's directory).
inline PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  try {
    PipelineConfig c;
    auto resolve = [&](const std::string& s) {
      std::filesystem::path p(s);
      return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    if (j.contains("input")) c.input = resolve(j.at("input").get<std::string>());
    c.label_column = j.value("label_column", c.label_column);
    c.seed = j.value("seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = resolve(j.at("output_dir").get<std::string>());
    auto enabled = [&](const char* key, bool dflt) {
      return j.contains(key) ? j.at(key).value("enabled", dflt) : dflt;
    };
    c.clean = enabled("clean", true);
    c.normalize = enabled("normalize", true);
    if (j.contains("fcbf")) {
      const auto& f = j.at("fcbf");
      c.fcbf.enabled = f.value("enabled", true);
      c.fcbf.threshold = f.value("threshold", c.fcbf.threshold);
      c.fcbf.n_bins = f.value("n_bins", c.fcbf.n_bins);
    }
    if (j.contains("pca")) {
      const auto& p = j.at("pca");
      c.pca.enabled = p.value("enabled", true);
      c.pca.variance_fraction = p.value("variance_fraction", c.pca.variance_fraction);
      if (p.contains("n_components") && !p.at("n_components").is_null())
        c.pca.n_components = p.at("n_components").get<std::size_t>();
    }
    if (j.contains("balance")) {
      const auto& b = j.at("balance");
      c.balance.enabled = b.value("enabled", true);
      if (b.contains("k") && !b.at("k").is_null()) c.balance.config.k = b.at("k").get<std::size_t>();
      c.balance.config.smote_k_neighbors = b.value("smote_k_neighbors", c.balance.config.smote_k_neighbors);
      const auto policy = b.value("policy", std::string("match_majority"));
      if (policy == "match_majority")
        c.balance.config.policy = TargetPolicy::match_majority;
      else if (policy == "explicit_factor")
        c.balance.config.policy = TargetPolicy::explicit_factor;
      else
        throw ConfigError("unknown balance policy '" + policy + "'");
      c.balance.config.factor = b.value("factor", c.balance.config.factor);
    }
    if (j.contains("balance_order")) {
      const auto o = j.at("balance_order").get<std::string>();
      if (o == "before_split")
        c.balance_order = BalanceOrder::before_split;
      else if (o == "after_split")
        c.balance_order = BalanceOrder::after_split;
      else
        throw ConfigError("unknown balance_order '" + o + "'");
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      c.split.test_fraction = s.value("test_fraction", c.split.test_fraction);
      c.split.validation_fraction = s.value("validation_fraction", c.split.validation_fraction);
      c.split.stratified = s.value("stratified", c.split.stratified);
    }
    c.split.validate();
    if (j.contains("model")) {
      const auto& m = j.at("model");
      c.model = model_kind_from_string(m.value("kind", std::string("random_forest")));
      if (m.contains("random_forest")) c.rf = m.at("random_forest").get<RfParams>();
      if (m.contains("cnn")) c.cnn = m.at("cnn").get<CnnParams>();
    }
    c.rf.validate();
    c.cnn.validate();
    if (j.contains("hpo") && !j.at("hpo").is_null()) {
      const auto& h = j.at("hpo");
      HpoSettings s;
      s.budget = h.value("budget", s.budget);
      s.tpe.gamma = h.value("gamma", s.tpe.gamma);
      s.tpe.n_startup = h.value("n_startup", s.tpe.n_startup);
      s.tpe.n_candidates = h.value("n_candidates", s.tpe.n_candidates);
      if (h.contains("space")) s.space = hpo::space_from_json(h.at("space"));
      s.tpe.validate();
      c.hpo = s;
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid pipeline config: ") + e.what());
  }
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

// Data threaded between stages. Before the split only `all` is set; after it,
// train/validation/test are.
struct Partitions {
  std::optional<Dataset> all, train, validation, test;

  bool is_split() const noexcept { return train.has_value(); }
  const Dataset& fit_target() const { return is_split() ? *train : *all; }

  template <class F>
  void for_each(F&& f) {
    for (auto* d : {&all, &train, &validation, &test})
      if (*d) f(**d);
  }
};

inline nlohmann::json partitions_to_json(const Partitions& p) {
  nlohmann::json j = nlohmann::json::object();
  if (p.all) j["all"] = io::dataset_to_json(*p.all);
  if (p.train) j["train"] = io::dataset_to_json(*p.train);
  if (p.validation) j["validation"] = io::dataset_to_json(*p.validation);
  if (p.test) j["test"] = io::dataset_to_json(*p.test);
  return j;
}

inline Partitions partitions_from_json(const nlohmann::json& j) {
  Partitions p;
  if (j.contains("all")) p.all = io::dataset_from_json(j.at("all"));
  if (j.contains("train")) p.train = io::dataset_from_json(j.at("train"));
  if (j.contains("validation")) p.validation = io::dataset_from_json(j.at("validation"));
  if (j.contains("test")) p.test = io::dataset_from_json(j.at("test"));
  return p;
}

inline nlohmann::json partition_counts(const Partitions& p) {
  nlohmann::json j = nlohmann::json::object();
  auto describe = [](const Dataset& d) {
    std::size_t synthetic = 0;
    for (const auto& t : d.provenance) synthetic += t.synthetic;
    return nlohmann::json{{"rows", d.rows()}, {"cols", d.cols()}, {"class_counts", d.class_counts()}, {"synthetic", synthetic}};
  };
  if (p.all) j["all"] = describe(*p.all);
  if (p.train) j["train"] = describe(*p.train);
  if (p.validation) j["validation"] = describe(*p.validation);
  if (p.test) j["test"] = describe(*p.test);
  return j;
}

struct StageRecord {
  std::string name;
  std::string hash;
  bool cache_hit = false;
  nlohmann::json counts;
};

struct RunSummary {
  std::vector<StageRecord> stages;
  BalanceOrder balance_order = BalanceOrder::after_split;
  Partitions data;
  std::optional<TrainedModel> model;
  std::optional<ClassMetrics> metrics;
  std::optional<Report> report;
  std::optional<hpo::OptimizeResult> tuning;
  std::size_t test_synthetic_rows = 0;

  bool all_cache_hits() const {
    return std::all_of(stages.begin(), stages.end(), [](const auto& s) { return s.cache_hit; });
  }

  nlohmann::json to_json() const {
    nlohmann::json st = nlohmann::json::array();
    for (const auto& s : stages)
      st.push_back({{"stage", s.name}, {"hash", s.hash}, {"cache_hit", s.cache_hit}, {"counts", s.counts}});
    nlohmann::json j = {{"balance_order", to_string(balance_order)},
                        {"stages", st},
                        {"test_synthetic_rows", test_synthetic_rows}};
    if (metrics)
      j["metrics"] = {{"accuracy", metrics->micro_accuracy},
                      {"macro_precision", metrics->macro.precision},
                      {"macro_recall", metrics->macro.recall},
                      {"macro_f1", metrics->macro.f1}};
    return j;
  }
};

inline std::vector<std::string> stage_order(BalanceOrder o) {
  if (o == BalanceOrder::after_split) return {"ingest", "split", "preprocess", "select", "reduce", "balance", "train", "evaluate"};
  return {"ingest", "preprocess", "select", "reduce", "balance", "split", "train", "evaluate"};
}

// Runs the stage chain. Each stage writes its payload and a manifest holding a
// hash of (upstream hash, stage name, stage parameters) under <out>/<stage>/;
// a stage whose manifest hash matches is loaded instead of recomputed.
class Runner {
public:
  explicit Runner(PipelineConfig cfg, std::ostream* log = &std::cerr, bool verbose = false)
      : cfg_(std::move(cfg)), log_(log), verbose_(verbose) {}

  const PipelineConfig& config() const noexcept { return cfg_; }

  // Runs every stage up to and including `until`.
  RunSummary run(const std::string& until = "evaluate") {
    const auto order = stage_order(cfg_.balance_order);
    if (std::find(order.begin(), order.end(), until) == order.end()) throw ConfigError("unknown stage '" + until + "'");
    RunSummary s;
    s.balance_order = cfg_.balance_order;
    std::string hash;
    for (const auto& name : order) {
      run_stage(name, s, hash);
      if (name == until) break;
    }
    for (const auto* part : {&s.data.test})
      if (*part)
        for (const auto& t : (*part)->provenance) s.test_synthetic_rows += t.synthetic;
    return s;
  }

  // Trains the configured model with default parameters (W/oHOP) and with the
  // best TPE configuration (W/HOP) on the same split, then reports both.
  RunSummary run_hpo_comparison() {
    if (!cfg_.hpo) throw ConfigError("tune: config has no 'hpo' section");
    RunSummary s = run("balance");
    std::string hash = s.stages.empty() ? std::string{} : s.stages.back().hash;
    if (!s.data.is_split()) run_stage("split", s, hash);
    const auto params = nlohmann::json{{"model", to_string(cfg_.model)},
                                       {"rf", cfg_.rf},
                                       {"cnn", cfg_.cnn},
                                       {"hpo", to_json(cfg_)["hpo"]},
                                       {"seed", cfg_.seed}};
    const std::string h = next_hash(hash, "tune", params);
    const auto dir = cfg_.output_dir / "tune";
    StageRecord rec{"tune", h, false, {}};
    const auto t0 = std::chrono::steady_clock::now();
    guarded("tune", [&] {
      if (manifest_matches(dir, h)) {
        rec.cache_hit = true;
        const auto j = io::read_json(dir / "comparison.json");
        s.report = Report{j, io::read_file(dir / "comparison.txt")};
        return;
      }
      const Dataset& train = *s.data.train;
      const Dataset& val = *s.data.validation;
      const Dataset& test = *s.data.test;
      if (val.rows() == 0) throw ConfigError("tune: validation_fraction must be > 0");

      TrainedModel base = fit_model(train, val, cfg_.rf, cfg_.cnn);
      auto tuning = tune(train, val);
      const auto best_rf = apply_config(cfg_.rf, tuning.best_config);
      const auto best_cnn = apply_config(cfg_.cnn, tuning.best_config);
      TrainedModel tuned = fit_model(train, val, best_rf, best_cnn);

      HpoComparison cmp{evaluate_model(base, test), evaluate_model(tuned, test)};
      s.metrics = cmp.with_hpo.metrics;
      nlohmann::json extra = {{"balance_order", to_string(cfg_.balance_order)},
                              {"best_config", hpo::config_to_json(tuning.best_config)},
                              {"best_validation_score", tuning.best_score},
                              {"budget", cfg_.hpo->budget}};
      s.report = render_report({cmp.without_hpo, cmp.with_hpo}, cmp, extra);
      std::ostringstream hist;
      hpo::write_history(hist, tuning.history);
      io::write_file_atomic(dir / "history.jsonl", hist.str());
      io::write_json(dir / "comparison.json", s.report->json);
      io::write_file_atomic(dir / "comparison.txt", s.report->text);
      s.tuning = std::move(tuning);
      write_manifest(dir, "tune", h, {});
    });
    log_stage(rec, t0);
    s.stages.push_back(rec);
    return s;
  }

private:
  static std::string next_hash(const std::string& prev, const std::string& stage, const nlohmann::json& params) {
    return io::to_hex(fnv1a64(params.dump(), fnv1a64(stage, fnv1a64(prev))));
  }

  static bool manifest_matches(const std::filesystem::path& dir, const std::string& hash) {
    const auto m = dir / "manifest.json";
    if (!std::filesystem::exists(m)) return false;
    try {
      return io::read_json(m).value("hash", "") == hash;
    } catch (const std::exception&) {
      return false;
    }
  }

  static void write_manifest(const std::filesystem::path& dir, const std::string& stage, const std::string& hash,
                             const nlohmann::json& counts) {
    io::write_json(dir / "manifest.json", {{"stage", stage}, {"hash", hash}, {"counts", counts}});
  }

  template <class F>
  void guarded(const std::string& stage, F&& body) {
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const DataError& e) {
      log({{"stage", stage}, {"status", "error"}, {"error", e.what()}});
      throw StageError(stage, e.what(), true);
    } catch (const ConfigError& e) {
      log({{"stage", stage}, {"status", "error"}, {"error", e.what()}});
      throw StageError(stage, e.what(), false);
    } catch (const std::exception& e) {
      log({{"stage", stage}, {"status", "error"}, {"error", e.what()}});
      throw StageError(stage, e.what(), false);
    }
  }

  void log(const nlohmann::json& j) const {
    if (log_) *log_ << j.dump() << std::endl;
  }

  void log_stage(const StageRecord& r, std::chrono::steady_clock::time_point t0) const {
    nlohmann::json j = {{"stage", r.name},
                        {"status", "ok"},
                        {"cache", r.cache_hit ? "hit" : "miss"},
                        {"hash", r.hash},
                        {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
    if (verbose_) j["counts"] = r.counts;
    log(j);
  }

  nlohmann::json stage_params(const std::string& name) const {
    if (name == "ingest")
      return {{"input_hash", input_hash()}, {"label_column", cfg_.label_column}, {"clean", cfg_.clean}};
    if (name == "split")
      return {{"test_fraction", cfg_.split.test_fraction},
              {"validation_fraction", cfg_.split.validation_fraction},
              {"stratified", cfg_.split.stratified},
              {"seed", derive_seed(cfg_.seed, "split")}};
    if (name == "preprocess") return {{"enabled", cfg_.normalize}};
    if (name == "select")
      return {{"enabled", cfg_.fcbf.enabled}, {"threshold", cfg_.fcbf.threshold}, {"n_bins", cfg_.fcbf.n_bins}};
    if (name == "reduce") return to_json(cfg_)["pca"];
    if (name == "balance") {
      auto j = to_json(cfg_)["balance"];
      j["seed"] = derive_seed(cfg_.seed, "balance");
      return j;
    }
    if (name == "train") {
      auto j = to_json(cfg_)["model"];
      j["seed"] = derive_seed(cfg_.seed, "train");
      if (cfg_.hpo) j["hpo"] = to_json(cfg_)["hpo"];
      return j;
    }
    return nlohmann::json::object();
  }

  std::string input_hash() const {
    if (!input_hash_) input_hash_ = io::to_hex(fnv1a64(io::read_file(cfg_.input)));
    return *input_hash_;
  }

  void run_stage(const std::string& name, RunSummary& s, std::string& hash) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = cfg_.output_dir / name;
    StageRecord rec{name, "", false, {}};
    guarded(name, [&] {
      rec.hash = next_hash(hash, name, stage_params(name));
      const bool hit = manifest_matches(dir, rec.hash);
      if (name == "train")
        train_stage(dir, hit, s);
      else if (name == "evaluate")
        evaluate_stage(dir, hit, s);
      else if (hit)
        s.data = partitions_from_json(nlohmann::json::from_cbor(io::read_file(dir / "partitions.cbor")));
      else
        data_stage(name, dir, s.data);
      rec.cache_hit = hit;
      rec.counts = partition_counts(s.data);
      if (!hit) {
        if (name != "train" && name != "evaluate")
          io::write_file_atomic(dir / "partitions.cbor", as_string(nlohmann::json::to_cbor(partitions_to_json(s.data))));
        write_manifest(dir, name, rec.hash, rec.counts);
      }
    });
    hash = rec.hash;
    log_stage(rec, t0);
    s.stages.push_back(std::move(rec));
  }

  static std::string as_string(const std::vector<std::uint8_t>& bytes) { return {bytes.begin(), bytes.end()}; }

  void data_stage(const std::string& name, const std::filesystem::path& dir, Partitions& p) {
    if (name == "ingest") {
      Dataset raw = load_csv(cfg_.input, cfg_.label_column);
      CleanReport report;
      if (cfg_.clean) {
        auto res = clean(raw);
        raw = std::move(res.data);
        report = std::move(res.report);
      }
      raw.validate();
      io::write_json(dir / "clean_report.json", report);
      p = Partitions{};
      p.all = std::move(raw);
    } else if (name == "split") {
      SplitSpec spec = cfg_.split;
      spec.seed = derive_seed(cfg_.seed, "split");
      auto parts = split(*p.all, spec);
      io::write_json(dir / "split.json", {{"train", parts.train_rows},
                                          {"validation", parts.validation_rows},
                                          {"test", parts.test_rows}});
      p.all.reset();
      p.train = std::move(parts.train);
      p.validation = std::move(parts.validation);
      p.test = std::move(parts.test);
    } else if (name == "preprocess") {
      if (!cfg_.normalize) return;
      const auto stats = fit_minmax(p.fit_target().features, p.fit_target().feature_names);
      io::write_json(dir / "norm_stats.json", stats);
      p.for_each([&](Dataset& d) { d.features = apply_minmax(d.features, stats); });
    } else if (name == "select") {
      if (!cfg_.fcbf.enabled) return;
      const Dataset& fit = p.fit_target();
      const auto subset = fcbf_select(discretize_columns(fit, cfg_.fcbf.n_bins), fit.labels, cfg_.fcbf.threshold,
                                      fit.feature_names);
      io::write_json(dir / "feature_subset.json", subset);
      if (subset.selected_indices.empty()) throw DataError("feature selection kept no features");
      p.for_each([&](Dataset& d) { d = apply_selection(d, subset); });
    } else if (name == "reduce") {
      if (!cfg_.pca.enabled) return;
      const PcaTarget target = cfg_.pca.n_components ? PcaTarget{ComponentCount{*cfg_.pca.n_components}}
                                                     : PcaTarget{VarianceFraction{cfg_.pca.variance_fraction}};
      const auto model = fit_pca(p.fit_target().features, target);
      io::write_json(dir / "pca_model.json", model);
      const auto names = component_names(model.n_components());
      p.for_each([&](Dataset& d) { d = d.with_features(transform(d.features, model), names); });
    } else if (name == "balance") {
      if (!cfg_.balance.enabled) return;
      BalanceConfig bc = cfg_.balance.config;
      bc.seed = derive_seed(cfg_.seed, "balance");
      auto& target = p.is_split() ? p.train : p.all;
      auto res = balance_dataset(*target, bc);
      io::write_json(dir / "balance_report.json", res.report);
      target = std::move(res.data);
    }
  }

  TrainedModel fit_model(const Dataset& train, const Dataset& val, RfParams rf, CnnParams cnn) const {
    if (cfg_.model == ModelKind::random_forest) {
      rf.seed = derive_seed(cfg_.seed, "train");
      return train_random_forest_model(train, rf);
    }
    cnn.seed = derive_seed(cfg_.seed, "train");
    auto m = build_cnn_model(cnn, train.cols(), train.label_map);
    return train_cnn_model(std::move(m), train, val, cnn);
  }

  hpo::OptimizeResult tune(const Dataset& train, const Dataset& val) const {
    const auto space = cfg_.hpo->space.value_or(default_search_space(cfg_.model));
    auto tpe = cfg_.hpo->tpe;
    tpe.seed = derive_seed(cfg_.seed, "hpo");
    auto objective = [&](const hpo::Config& c) {
      const auto m = fit_model(train, val, apply_config(cfg_.rf, c), apply_config(cfg_.cnn, c));
      const auto pred = predict(m, val.features);
      std::size_t ok = 0;
      for (std::size_t i = 0; i < pred.labels.size(); ++i) ok += pred.labels[i] == val.labels[i];
      return static_cast<double>(ok) / static_cast<double>(pred.labels.size());
    };
    return hpo::optimize(objective, space, cfg_.hpo->budget, tpe, [&](const hpo::Trial& t) {
      if (verbose_) log({{"stage", "hpo"}, {"trial", hpo::trial_to_json(t)}});
    });
  }

  ModelResult evaluate_model(const TrainedModel& m, const Dataset& test) const {
    const auto pred = predict(m, test.features);
    const auto cm = confusion(test.labels, pred.labels, test.n_classes(), test.label_map.class_names());
    return {to_string(m.kind), metrics(cm), m.meta.train_seconds};
  }

  void train_stage(const std::filesystem::path& dir, bool hit, RunSummary& s) {
    if (!s.data.is_split()) throw ConfigError("train: data has not been split");
    if (hit) {
      s.model = load_model(dir / "model.json");
      return;
    }
    const Dataset& train = *s.data.train;
    const Dataset& val = *s.data.validation;
    if (cfg_.hpo) {
      if (val.rows() == 0) throw ConfigError("train: hpo needs validation_fraction > 0");
      auto tuning = tune(train, val);
      s.model = fit_model(train, val, apply_config(cfg_.rf, tuning.best_config), apply_config(cfg_.cnn, tuning.best_config));
      std::ostringstream hist;
      hpo::write_history(hist, tuning.history);
      io::write_file_atomic(dir / "history.jsonl", hist.str());
      s.tuning = std::move(tuning);
    } else {
      s.model = fit_model(train, val, cfg_.rf, cfg_.cnn);
    }
    std::filesystem::create_directories(dir);
    save_model(*s.model, dir / "model.json");
    if (s.model->kind == ModelKind::cnn) {
      const auto& h = s.model->meta.history;
      io::write_json(dir / "training_history.json", {{"epoch_loss", h.epoch_loss},
                                                     {"validation_accuracy", h.validation_accuracy},
                                                     {"epoch_seconds", h.epoch_seconds},
                                                     {"train_seconds", s.model->meta.train_seconds}});
    }
  }

  void evaluate_stage(const std::filesystem::path& dir, bool hit, RunSummary& s) {
    if (hit) {
      s.report = Report{io::read_json(dir / "report.json"), io::read_file(dir / "report.txt")};
      const auto& macro = s.report->json.at("models").at(0).at("macro");
      ClassMetrics m;
      m.micro_accuracy = s.report->json.at("models").at(0).at("overall_accuracy").get<double>();
      m.macro.accuracy = macro.at("accuracy").get<double>();
      m.macro.precision = macro.at("precision").get<double>();
      m.macro.recall = macro.at("recall").get<double>();
      m.macro.f1 = macro.at("f1").get<double>();
      s.metrics = m;
      return;
    }
    if (!s.model) throw ConfigError("evaluate: no trained model");
    const auto result = evaluate_model(*s.model, *s.data.test);
    s.metrics = result.metrics;
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& st : s.stages) stages.push_back({{"stage", st.name}, {"counts", st.counts}});
    s.report = render_report({result}, std::nullopt,
                             {{"balance_order", to_string(cfg_.balance_order)}, {"pipeline", stages}});
    io::write_json(dir / "report.json", s.report->json);
    io::write_file_atomic(dir / "report.txt", s.report->text);
  }

  PipelineConfig cfg_;
  std::ostream* log_;
  bool verbose_;
  mutable std::optional<std::string> input_hash_;
};

inline RunSummary run_pipeline(const PipelineConfig& cfg, std::ostream* log = &std::cerr) {
  return Runner(cfg, log).run();
}

inline RunSummary run_hpo_comparison(const PipelineConfig& cfg, std::ostream* log = &std::cerr) {
  return Runner(cfg, log).run_hpo_comparison();
}

}  // namespace nids::pipeline
