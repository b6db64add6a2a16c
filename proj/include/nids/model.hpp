#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "nids/cnn.hpp"
#include "nids/dataset.hpp"
#include "nids/error.hpp"
#include "nids/random_forest.hpp"

namespace nids {

enum class ModelKind { random_forest, cnn };

inline std::string to_string(ModelKind k) { return k == ModelKind::cnn ? "cnn" : "random_forest"; }

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "random_forest" || s == "rf") return ModelKind::random_forest;
  if (s == "cnn") return ModelKind::cnn;
  throw ConfigError("unknown model kind '" + s + "'");
}

struct TrainingMetadata {
  double train_seconds = 0.0;
  std::optional<double> final_train_loss;  // cnn only
  CnnHistory history;                      // cnn only
};

struct TrainedModel {
  ModelKind kind = ModelKind::random_forest;
  std::variant<RandomForest, CnnModel> impl;
  LabelMap label_map;
  TrainingMetadata meta;

  std::size_t n_classes() const { return label_map.size(); }
};

struct Prediction {
  std::vector<int> labels;
  Matrix probabilities;
};

inline TrainedModel train_random_forest_model(const Dataset& train, const RfParams& p) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainedModel m;
  m.kind = ModelKind::random_forest;
  m.impl = train_random_forest(train, p);
  m.label_map = train.label_map;
  m.meta.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

// Untrained network wrapped as a model.
inline TrainedModel build_cnn_model(const CnnParams& p, std::size_t input_len, const LabelMap& labels) {
  TrainedModel m;
  m.kind = ModelKind::cnn;
  m.impl = build_cnn(p, input_len, labels.size());
  m.label_map = labels;
  return m;
}

inline TrainedModel train_cnn_model(TrainedModel m, const Dataset& train, const Dataset& validation,
                                    const CnnParams& p) {
  auto* net = std::get_if<CnnModel>(&m.impl);
  if (!net) throw ConfigError("train_cnn: model is not a cnn");
  const auto t0 = std::chrono::steady_clock::now();
  m.meta.history = train_cnn(*net, train, validation, p);
  m.meta.final_train_loss = m.meta.history.final_train_loss;
  m.meta.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

// Labels are the argmax of the class probabilities, ties to the lower index.
inline Prediction predict(const TrainedModel& m, const Matrix& x) {
  Prediction p;
  p.probabilities = std::visit([&](const auto& impl) { return predict_proba(impl, x); }, m.impl);
  p.labels = argmax_rows(p.probabilities);
  return p;
}

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json model_to_json(const TrainedModel& m) {
  nlohmann::json j;
  j["format"] = "nids-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = to_string(m.kind);
  j["label_map"] = m.label_map.class_names();
  j["training"] = {{"train_seconds", m.meta.train_seconds}};
  if (m.meta.final_train_loss) j["training"]["final_train_loss"] = *m.meta.final_train_loss;
  if (const auto* rf = std::get_if<RandomForest>(&m.impl)) {
    j["hyperparameters"] = rf->params;
    j["n_features"] = rf->n_features;
    j["trees"] = rf->trees;
  } else {
    const auto& net = std::get<CnnModel>(m.impl);
    j["hyperparameters"] = net.params();
    j["input_len"] = net.input_len();
    j["weights"] = net.weights();
  }
  return j;
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "nids-model") throw DataError("not a model file");
  if (j.at("version").get<int>() != kModelFormatVersion)
    throw DataError("unsupported model version " + std::to_string(j.at("version").get<int>()));
  TrainedModel m;
  m.kind = model_kind_from_string(j.at("kind").get<std::string>());
  m.label_map = LabelMap::from_names(j.at("label_map").get<std::vector<std::string>>());
  m.meta.train_seconds = j.at("training").value("train_seconds", 0.0);
  if (j.at("training").contains("final_train_loss"))
    m.meta.final_train_loss = j.at("training").at("final_train_loss").get<double>();
  if (m.kind == ModelKind::random_forest) {
    RandomForest rf;
    rf.params = j.at("hyperparameters").get<RfParams>();
    rf.n_features = j.at("n_features").get<std::size_t>();
    rf.n_classes = m.label_map.size();
    rf.trees = j.at("trees").get<std::vector<DecisionTree>>();
    m.impl = std::move(rf);
  } else {
    CnnModel net(j.at("hyperparameters").get<CnnParams>(), j.at("input_len").get<std::size_t>(), m.label_map.size());
    auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != net.parameter_count()) throw DataError("model weights do not match architecture");
    net.weights() = std::move(w);
    m.impl = std::move(net);
  }
  return m;
}

inline void save_model(const TrainedModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << model_to_json(m).dump() << '\n';
}

inline TrainedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return model_from_json(nlohmann::json::parse(in));
}

}  // namespace nids
