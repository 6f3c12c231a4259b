// SPDX-License-Identifier: Apache-2.0
//
// Synthetic irregularly sampled time series with known risk functions.
// Each feature has an Ornstein-Uhlenbeck latent with unit stationary
// variance, observed at homogeneous Poisson times.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "irnn/datapipe.hpp"
#include "irnn/kvconfig.hpp"

namespace irnn::synth {

inline constexpr int kSchemaVersion = 1;

enum class RiskKind { null, linear, u_shaped, saturating };

std::string to_string(RiskKind kind);
RiskKind parse_risk_kind(std::string_view name);

/// f(z) for standardized latent z: linear c*z, u_shaped c*(z^2 - 1),
/// saturating c*tanh(1.5 z), null 0.
double risk_value(RiskKind kind, double coef, double z);

struct FeatureSpec {
  std::string name;
  double rate = 1.0;   // expected observations per hour
  double theta = 0.3;  // mean reversion per hour
  RiskKind risk = RiskKind::null;
  double coef = 0.0;
  double offset = 0.0;  // raw = offset + scale * z
  double scale = 1.0;
};

struct GeneratorConfig {
  std::vector<FeatureSpec> features;
  std::size_t n_samples = 20000;
  double horizon = 6.0;  // hours
  bool trend = false;
  std::size_t trend_feature = 0;
  double trend_coef = 0.0;
  double trend_window = 2.0;  // hours
  double temperature = 1.0;
  double intercept = 0.0;
  std::uint64_t seed = 0;
  /// No-signal control: waives the at-least-one-signal requirement.
  bool control = false;

  std::size_t size() const { return features.size(); }
  std::vector<std::string> names() const;
  /// Throws ConfigError.
  void validate() const;
};

/// D = 8: linear, U-shaped, saturating and trend signals plus four null
/// features; 20000 samples over 6 hours.
GeneratorConfig default_config();
/// Same layout with every risk function null and no trend.
GeneratorConfig null_config();

/// `preset = default | null` selects the base; the remaining keys override
/// it (per-feature lists must have D entries).
GeneratorConfig config_from(const config::KeyValues& kv);
nlohmann::json to_json(const GeneratorConfig& config);

struct SynthDataset {
  GeneratorConfig config;
  std::vector<data::EventGroup> samples;  // raw units
  std::vector<int> labels;
  std::vector<double> log_odds;  // before temperature scaling
};

SynthDataset generate(const GeneratorConfig& config, std::size_t jobs = 1);

/// f_d on `grid` (standardized latent units, which z-scoring reproduces).
std::vector<double> true_risk(const GeneratorConfig& config, std::size_t feature,
                              std::span<const double> grid);

/// Writes events.csv, labels.csv and truth.json into `dir`.
void write_dataset(const std::filesystem::path& dir, const SynthDataset& ds);

}  // namespace irnn::synth
