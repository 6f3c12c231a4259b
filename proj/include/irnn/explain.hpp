// SPDX-License-Identifier: Apache-2.0
//
// Explanation artifacts read directly off a trained I-RNN: per-step
// contribution traces, global importance, risk curves and decay curves.
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "irnn/datapipe.hpp"
#include "irnn/model.hpp"

namespace irnn::explain {

inline constexpr int kSchemaVersion = 1;

struct ContributionTrace {
  std::string sample_id;
  std::size_t features = 0;
  std::vector<std::string> feature_names;
  std::vector<double> times;          // valid steps
  std::vector<double> logits;         // valid steps
  std::vector<double> contributions;  // valid steps x features, log-odds
  double bias = 0.0;

  std::size_t steps() const { return times.size(); }
  double at(std::size_t t, std::size_t d) const { return contributions[t * features + d]; }
};

/// Throws ContractError for anything but an I-RNN.
ContributionTrace local_trace(const model::Model& model,
                              const data::TimeSeriesSample& sample,
                              const std::vector<std::string>& feature_names = {});

/// u_d = mean over valid steps of c_t^d.
std::vector<double> time_average(const ContributionTrace& trace);

struct ImportanceEntry {
  std::size_t feature = 0;
  std::string name;
  double importance = 0.0;  // mean |u_d| over samples
};

struct GlobalImportance {
  std::vector<ImportanceEntry> ranked;  // descending, ties by feature index
};

GlobalImportance global_importance(const model::Model& model,
                                   const data::SampleRefs& samples,
                                   const std::vector<std::string>& feature_names = {});

struct RiskCurveOptions {
  std::size_t bins = 20;
  bool smooth = false;
  double span = 0.3;
  /// Pool (x_t, c_t) over steps instead of (last observed x, u) per sample.
  bool per_timestep = false;
};

struct RiskCurve {
  std::size_t feature = 0;
  std::string name;
  std::vector<double> centers;      // normalized units, ascending
  std::vector<double> raw_centers;  // empty without NormStats
  std::vector<double> mean_contribution;
  std::vector<std::size_t> counts;
  std::vector<double> smoothed;  // at centers; empty unless requested
  std::size_t pooled_points = 0;
};

RiskCurve risk_curve(const model::Model& model, const data::SampleRefs& samples,
                     std::size_t feature, const RiskCurveOptions& options = {},
                     const data::NormStats* stats = nullptr);

struct DecayCurve {
  std::size_t feature = 0;
  std::string name;
  std::vector<double> delta;  // normalized elapsed time in [0,1]
  std::vector<double> hours;  // empty without NormStats
  std::vector<double> gamma;
};

/// gamma_d(delta) = max(0, w_gamma[d] delta + b_gamma[d]). Needs the
/// diagonal decay configuration.
DecayCurve decay_curve(const model::Model& model, std::size_t feature,
                       std::span<const double> grid,
                       const data::NormStats* stats = nullptr);

std::vector<double> uniform_grid(std::size_t points);

/// Tricube-weighted local linear regression of y on x evaluated at `at`,
/// using the ceil(span * n) nearest points for each fit.
std::vector<double> lowess(std::span<const double> x, std::span<const double> y,
                           std::span<const double> at, double span);

void write_trace_csv(const std::filesystem::path& path, const ContributionTrace& trace);
nlohmann::json to_json(const GlobalImportance& importance);
nlohmann::json to_json(const RiskCurve& curve);
nlohmann::json to_json(const DecayCurve& curve);

}  // namespace irnn::explain
