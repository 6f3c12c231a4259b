// SPDX-License-Identifier: Apache-2.0
#include "irnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "irnn/errors.hpp"

namespace irnn::metrics {

namespace {

struct ClassCounts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("scores and labels differ in length");
  }
  ClassCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++c.pos;
    } else if (labels[i] == 0) {
      ++c.neg;
    } else {
      throw ContractError("labels must be 0 or 1");
    }
    if (!std::isfinite(scores[i])) {
      throw NumericError("non-finite score");
    }
  }
  if (c.pos == 0 || c.neg == 0) {
    throw NumericError("metric undefined: both classes must be present");
  }
  return c;
}

}  // namespace

double auc_pairwise(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = check_inputs(scores, labels);
  // Twice the Mann-Whitney U, kept integral.
  std::uint64_t twice_u = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) {
        twice_u += 2;
      } else if (scores[i] == scores[j]) {
        twice_u += 1;
      }
    }
  }
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(c.pos) * static_cast<double>(c.neg));
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
      ++j;
    }
    // 1-based ranks i+1..j+1 share their mean.
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      ranks[order[k]] = r;
    }
    i = j + 1;
  }
  return ranks;
}

double auc_rank_sum(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = check_inputs(scores, labels);
  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (labels[i] == 1) {
      rank_sum += ranks[i];
    }
  }
  const double p = static_cast<double>(c.pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(c.neg));
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() <= kPairwiseAucLimit) {
    return auc_pairwise(scores, labels);
  }
  return auc_rank_sum(scores, labels);
}

Breakeven breakeven(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = check_inputs(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sweep thresholds from -inf upward. Everything above the threshold is
  // predicted positive; passing a group of equal scores moves it to negative.
  std::size_t tp = c.pos, fp = c.neg;
  Breakeven best;
  bool have_best = false;
  auto consider = [&](double threshold) {
    Breakeven b;
    b.threshold = threshold;
    b.true_pos = tp;
    b.false_pos = fp;
    b.false_neg = c.pos - tp;
    b.true_neg = c.neg - fp;
    b.precision = (tp + fp) == 0 ? 1.0
                                 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    b.recall = static_cast<double>(tp) / static_cast<double>(c.pos);
    b.specificity = static_cast<double>(b.true_neg) / static_cast<double>(c.neg);
    if (!have_best) {
      best = b;
      have_best = true;
      return;
    }
    const double gap = std::abs(b.precision - b.recall);
    const double best_gap = std::abs(best.precision - best.recall);
    if (gap < best_gap ||
        (gap == best_gap && (b.specificity > best.specificity ||
                             (b.specificity == best.specificity && b.recall > best.recall)))) {
      best = b;
    }
  };

  consider(-std::numeric_limits<double>::infinity());
  std::size_t i = 0;
  while (i < order.size()) {
    const double v = scores[order[i]];
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == v) {
      if (labels[order[j]] == 1) {
        --tp;
      } else {
        --fp;
      }
      ++j;
    }
    if (j < order.size()) {
      const double next = scores[order[j]];
      double mid = v + (next - v) / 2.0;
      if (!(mid < next)) {
        mid = v;
      }
      consider(mid);
    } else {
      consider(std::numeric_limits<double>::infinity());
    }
    i = j;
  }
  return best;
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> labels) {
  const ClassCounts c = check_inputs(scores, labels);
  EvalReport r;
  r.auc = auc(scores, labels);
  const Breakeven b = breakeven(scores, labels);
  r.breakeven_threshold = b.threshold;
  r.ppv = b.precision;
  r.specificity = b.specificity;
  r.n_pos = c.pos;
  r.n_neg = c.neg;
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json threshold = r.breakeven_threshold;
  if (std::isinf(r.breakeven_threshold)) {
    threshold = r.breakeven_threshold > 0 ? "inf" : "-inf";
  }
  return {{"schema_version", kReportSchemaVersion},
          {"auc", r.auc},
          {"breakeven_threshold", threshold},
          {"ppv", r.ppv},
          {"specificity", r.specificity},
          {"n_pos", r.n_pos},
          {"n_neg", r.n_neg}};
}

EvalReport report_from_json(const nlohmann::json& doc) {
  EvalReport r;
  try {
    r.auc = doc.at("auc").get<double>();
    const auto& t = doc.at("breakeven_threshold");
    if (t.is_string()) {
      r.breakeven_threshold = t.get<std::string>() == "inf"
                                  ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity();
    } else {
      r.breakeven_threshold = t.get<double>();
    }
    r.ppv = doc.at("ppv").get<double>();
    r.specificity = doc.at("specificity").get<double>();
    r.n_pos = doc.at("n_pos").get<std::size_t>();
    r.n_neg = doc.at("n_neg").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

std::string format_mean_std(std::span<const double> values, int precision) {
  if (values.empty()) {
    throw ContractError("format_mean_std needs at least one value");
  }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
  }
  const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << mean << " (" << sd << ")";
  return os.str();
}

CrossCorrelation cross_correlation(std::span<const nd::Tensor> hidden,
                                   std::span<const nd::Tensor> features) {
  if (hidden.size() != features.size()) {
    throw DimensionError("cross_correlation: hidden and feature trace counts differ");
  }
  if (hidden.empty()) {
    throw NumericError("cross_correlation: fewer than 2 pooled points");
  }
  const std::size_t H = hidden[0].cols();
  const std::size_t D = features[0].cols();
  std::size_t n = 0;
  std::vector<double> mean_h(H, 0.0), mean_x(D, 0.0);
  // Constant columns are flagged exactly, not by a rounded variance.
  std::vector<std::uint8_t> varies_h(H, 0), varies_x(D, 0);
  std::vector<double> first_h(H, 0.0), first_x(D, 0.0);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (hidden[i].cols() != H || features[i].cols() != D ||
        hidden[i].rows() != features[i].rows()) {
      throw DimensionError("cross_correlation: trace shapes disagree");
    }
    for (std::size_t t = 0; t < hidden[i].rows(); ++t) {
      for (std::size_t j = 0; j < H; ++j) {
        mean_h[j] += hidden[i].at(t, j);
        varies_h[j] |= n > 0 && hidden[i].at(t, j) != first_h[j];
        if (n == 0) first_h[j] = hidden[i].at(t, j);
      }
      for (std::size_t d = 0; d < D; ++d) {
        mean_x[d] += features[i].at(t, d);
        varies_x[d] |= n > 0 && features[i].at(t, d) != first_x[d];
        if (n == 0) first_x[d] = features[i].at(t, d);
      }
      ++n;
    }
  }
  if (n < 2) {
    throw NumericError("cross_correlation: fewer than 2 pooled points");
  }
  for (double& m : mean_h) m /= static_cast<double>(n);
  for (double& m : mean_x) m /= static_cast<double>(n);

  std::vector<double> var_h(H, 0.0), var_x(D, 0.0), cov(D * H, 0.0);
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    for (std::size_t t = 0; t < hidden[i].rows(); ++t) {
      for (std::size_t d = 0; d < D; ++d) {
        const double dx = features[i].at(t, d) - mean_x[d];
        var_x[d] += dx * dx;
        for (std::size_t j = 0; j < H; ++j) {
          cov[d * H + j] += dx * (hidden[i].at(t, j) - mean_h[j]);
        }
      }
      for (std::size_t j = 0; j < H; ++j) {
        const double dh = hidden[i].at(t, j) - mean_h[j];
        var_h[j] += dh * dh;
      }
    }
  }

  CrossCorrelation out;
  out.features = D;
  out.hidden = H;
  out.pooled_points = n;
  out.values.assign(D * H, 0.0);
  out.degenerate.assign(D * H, 0);
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t j = 0; j < H; ++j) {
      const double denom = std::sqrt(var_x[d] * var_h[j]);
      if (!varies_x[d] || !varies_h[j] || !(denom > 0.0)) {
        out.degenerate[d * H + j] = 1;
        continue;
      }
      out.values[d * H + j] = std::clamp(cov[d * H + j] / denom, -1.0, 1.0);
    }
  }
  return out;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionError("spearman: lengths differ");
  }
  if (x.size() < 2) {
    return 0.0;
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    return 0.0;
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace irnn::metrics
