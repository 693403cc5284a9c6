#pragma once

// Versioned JSON persistence for fitted KNN models.

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "pems/knn.hpp"

namespace pems {

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json model_to_json(const KnnModel& m) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["predictors"] = names_of(m.predictors);
  j["target"] = std::string(name_of(m.target));
  j["means"] = m.means;
  j["stds"] = m.stds;
  j["k"] = m.k;
  j["weighting"] = std::string(name_of(m.weighting));
  j["leave_self_out"] = m.leave_self_out;
  j["rows"] = m.rows();
  j["matrix"] = m.matrix;
  j["targets"] = m.targets;
  j["source_rows"] = m.source_rows;
  return j;
}

inline KnnModel model_from_json(const nlohmann::json& j) {
  try {
    if (!j.contains("format_version")) throw io_error("model file has no format_version");
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw io_error("unsupported model format_version " + std::to_string(version));
    }
    KnnModel m;
    for (const auto& name : j.at("predictors")) m.predictors.push_back(require_variable(name.get<std::string>()));
    m.target = require_variable(j.at("target").get<std::string>());
    m.means = j.at("means").get<std::vector<double>>();
    m.stds = j.at("stds").get<std::vector<double>>();
    m.k = j.at("k").get<std::size_t>();
    m.weighting = parse_weighting(j.at("weighting").get<std::string>());
    m.leave_self_out = j.at("leave_self_out").get<bool>();
    m.matrix = j.at("matrix").get<std::vector<double>>();
    m.targets = j.at("targets").get<std::vector<double>>();
    m.source_rows = j.at("source_rows").get<std::vector<std::size_t>>();
    const std::size_t rows = j.at("rows").get<std::size_t>();
    const std::size_t p = m.predictors.size();
    if (m.means.size() != p || m.stds.size() != p || m.targets.size() != rows ||
        m.matrix.size() != rows * p || m.source_rows.size() != rows) {
      throw io_error("model file arrays have inconsistent sizes");
    }
    if (m.k < 1 || m.k > rows) throw io_error("model file has k outside [1, rows]");
    for (double s : m.stds) {
      if (!(s > 0.0)) throw io_error("model file has a non-positive standard deviation");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const KnnModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  out << model_to_json(m).dump() << '\n';
}

inline KnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed model file " + path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace pems
