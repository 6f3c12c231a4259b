// SPDX-License-Identifier: Apache-2.0
//
// Versioned JSON documents for model weights and normalization statistics.
// Doubles are written in shortest round-trip form, so save/load is bit-exact.
#pragma once

#include <filesystem>

#include "json.hpp"

#include "irnn/datapipe.hpp"
#include "irnn/model.hpp"

namespace irnn::io {

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json model_to_json(const model::Model& model);
model::Model model_from_json(const nlohmann::json& doc);

nlohmann::json norm_stats_to_json(const data::NormStats& stats);
data::NormStats norm_stats_from_json(const nlohmann::json& doc);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

void save_model(const std::filesystem::path& path, const model::Model& model);
model::Model load_model(const std::filesystem::path& path);

}  // namespace irnn::io
