#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "json.hpp"
#include "nids/dataset.hpp"
#include "nids/error.hpp"

namespace nids::io {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open '" + p.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes to a temporary sibling and renames it into place.
inline void write_file_atomic(const std::filesystem::path& p, std::string_view bytes) {
  std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, p);
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) { write_file_atomic(p, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(read_file(p)); }

inline nlohmann::json dataset_to_json(const Dataset& d) {
  std::vector<std::int64_t> ids;
  std::vector<std::uint8_t> synthetic;
  for (const auto& t : d.provenance) {
    ids.push_back(t.id);
    synthetic.push_back(t.synthetic ? 1 : 0);
  }
  return {{"rows", d.rows()},
          {"cols", d.cols()},
          {"feature_names", d.feature_names},
          {"class_names", d.label_map.class_names()},
          {"labels", d.labels},
          {"row_ids", ids},
          {"synthetic", synthetic},
          {"features", std::vector<double>(d.features.data().begin(), d.features.data().end())}};
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset d;
  const auto rows = j.at("rows").get<std::size_t>(), cols = j.at("cols").get<std::size_t>();
  const auto flat = j.at("features").get<std::vector<double>>();
  if (flat.size() != rows * cols) throw DataError("dataset payload: feature block has wrong size");
  d.features = Matrix(rows, cols);
  std::copy(flat.begin(), flat.end(), d.features.data().begin());
  d.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  d.label_map = LabelMap::from_names(j.at("class_names").get<std::vector<std::string>>());
  d.labels = j.at("labels").get<std::vector<int>>();
  const auto ids = j.at("row_ids").get<std::vector<std::int64_t>>();
  const auto syn = j.at("synthetic").get<std::vector<std::uint8_t>>();
  for (std::size_t i = 0; i < ids.size(); ++i) d.provenance.push_back({ids[i], syn.at(i) != 0});
  d.validate();
  return d;
}

inline std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace nids::io
