// SPDX-License-Identifier: Apache-2.0
#include "irnn/serialize.hpp"

#include <fstream>

namespace irnn::io {

using nlohmann::json;

namespace {

template <class T>
T field(const json& doc, const char* key) {
  if (!doc.contains(key)) {
    throw DataError(std::string("JSON document is missing '") + key + "'");
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("JSON field '") + key + "': " + e.what());
  }
}

}  // namespace

json model_to_json(const model::Model& m) {
  json params = json::object();
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const auto& t = m.params.at(i);
    params[m.params.name(i)] = {{"shape", t.shape}, {"data", t.data}};
  }
  json order = json::array();
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    order.push_back(m.params.name(i));
  }
  return {{"schema_version", kModelSchemaVersion},
          {"model_kind", model::to_string(m.kind)},
          {"D", m.features},
          {"hidden", m.hidden},
          {"config",
           {{"mu_diagonal", m.irnn.mu_diagonal},
            {"mu_static", m.irnn.mu_static},
            {"gamma_diagonal", m.irnn.gamma_diagonal}}},
          {"parameter_order", order},
          {"parameters", params}};
}

model::Model model_from_json(const json& doc) {
  const int version = field<int>(doc, "schema_version");
  if (version != kModelSchemaVersion) {
    throw DataError("unsupported model schema_version " + std::to_string(version));
  }
  model::Model m;
  m.kind = model::parse_model_kind(field<std::string>(doc, "model_kind"));
  m.features = field<std::size_t>(doc, "D");
  m.hidden = field<std::size_t>(doc, "hidden");
  const json cfg = field<json>(doc, "config");
  m.irnn.mu_diagonal = field<bool>(cfg, "mu_diagonal");
  m.irnn.mu_static = field<bool>(cfg, "mu_static");
  m.irnn.gamma_diagonal = field<bool>(cfg, "gamma_diagonal");
  const json params = field<json>(doc, "parameters");
  for (const auto& name : field<std::vector<std::string>>(doc, "parameter_order")) {
    const json p = field<json>(params, name.c_str());
    m.params.add(name, nd::Tensor(field<std::vector<std::size_t>>(p, "shape"),
                                  field<std::vector<double>>(p, "data")));
  }
  // Constructing a reference model checks that names and shapes agree.
  const model::Model ref = model::make_model(m.kind, m.features, 0, m.irnn);
  if (ref.params.size() != m.params.size()) {
    throw DataError("model parameters do not match model_kind " +
                    model::to_string(m.kind));
  }
  for (std::size_t i = 0; i < ref.params.size(); ++i) {
    if (ref.params.name(i) != m.params.name(i) ||
        ref.params.at(i).shape != m.params.at(i).shape) {
      throw DataError("parameter '" + m.params.name(i) +
                      "' has an unexpected name or shape");
    }
  }
  return m;
}

json norm_stats_to_json(const data::NormStats& stats) {
  json features = json::array();
  for (const auto& f : stats.features) {
    features.push_back({{"name", f.name},
                        {"observed", f.observed},
                        {"count", f.count},
                        {"skew", f.skew},
                        {"apply_log", f.apply_log},
                        {"log_shift", f.log_shift},
                        {"mean", f.mean},
                        {"std", f.std},
                        {"max_elapsed", f.max_elapsed}});
  }
  return {{"schema_version", data::NormStats::kSchemaVersion},
          {"features", features}};
}

data::NormStats norm_stats_from_json(const json& doc) {
  const int version = field<int>(doc, "schema_version");
  if (version != data::NormStats::kSchemaVersion) {
    throw DataError("unsupported norm stats schema_version " +
                    std::to_string(version));
  }
  data::NormStats stats;
  for (const auto& f : field<json>(doc, "features")) {
    data::FeatureStats s;
    s.name = field<std::string>(f, "name");
    s.observed = field<bool>(f, "observed");
    s.count = field<std::size_t>(f, "count");
    s.skew = field<double>(f, "skew");
    s.apply_log = field<bool>(f, "apply_log");
    s.log_shift = field<double>(f, "log_shift");
    s.mean = field<double>(f, "mean");
    s.std = field<double>(f, "std");
    s.max_elapsed = field<double>(f, "max_elapsed");
    if (!(s.std >= data::kStdFloor) || !(s.max_elapsed > 0.0)) {
      throw DataError("norm stats for '" + s.name + "' violate std/max_elapsed bounds");
    }
    stats.features.push_back(std::move(s));
  }
  return stats;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << doc.dump(2) << '\n';
}

void save_model(const std::filesystem::path& path, const model::Model& model) {
  write_json(path, model_to_json(model));
}

model::Model load_model(const std::filesystem::path& path) {
  return model_from_json(read_json(path));
}

}  // namespace irnn::io
