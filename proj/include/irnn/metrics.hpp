// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "irnn/ndcore.hpp"

namespace irnn::metrics {

/// Sample sizes up to this use exact pair counting; larger ones use ranks.
inline constexpr std::size_t kPairwiseAucLimit = 10000;

/// Mann-Whitney AUC: P(pos > neg) + P(tie)/2. Throws NumericError when a
/// class is missing.
double auc(std::span<const double> scores, std::span<const int> labels);
double auc_pairwise(std::span<const double> scores, std::span<const int> labels);
double auc_rank_sum(std::span<const double> scores, std::span<const int> labels);

struct Breakeven {
  double threshold = 0.0;  // predicted positive iff score > threshold
  double precision = 0.0;  // PPV
  double recall = 0.0;
  double specificity = 0.0;
  std::size_t true_pos = 0, false_pos = 0, true_neg = 0, false_neg = 0;
};

/// Scans -inf, the midpoints between consecutive distinct scores, and +inf;
/// returns the threshold minimizing |precision - recall|, ties broken by
/// higher specificity and then higher recall. Precision with no predicted
/// positives is taken as 1.
Breakeven breakeven(std::span<const double> scores, std::span<const int> labels);

struct EvalReport {
  double auc = 0.0;
  double breakeven_threshold = 0.0;
  double ppv = 0.0;
  double specificity = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels);

inline constexpr int kReportSchemaVersion = 1;
nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& doc);

/// "0.862 (0.003)": mean and sample standard deviation (0 for one value).
std::string format_mean_std(std::span<const double> values, int precision = 3);

/// Feature-by-hidden Pearson correlation pooled over every valid step of
/// every sample.
struct CrossCorrelation {
  std::size_t features = 0;
  std::size_t hidden = 0;
  std::vector<double> values;          // features x hidden
  std::vector<std::uint8_t> degenerate;  // 1 where a column had zero variance
  std::size_t pooled_points = 0;

  double at(std::size_t d, std::size_t j) const { return values[d * hidden + j]; }
  bool is_degenerate(std::size_t d, std::size_t j) const {
    return degenerate[d * hidden + j] != 0;
  }
};

/// `hidden[i]` is a T_i x H trace and `features[i]` a T_i x D trace of the
/// same sample.
CrossCorrelation cross_correlation(std::span<const nd::Tensor> hidden,
                                   std::span<const nd::Tensor> features);

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

std::vector<double> average_ranks(std::span<const double> values);

}  // namespace irnn::metrics
