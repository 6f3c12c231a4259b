// SPDX-License-Identifier: Apache-2.0
#include "irnn/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <utility>

#include "irnn/errors.hpp"
#include "irnn/text.hpp"

namespace irnn::explain {

namespace {

void require_irnn(const model::Model& m, const char* what) {
  if (m.kind != model::ModelKind::irnn) {
    throw ContractError(std::string(what) + ": unsupported model kind " +
                        model::to_string(m.kind) + " (needs irnn)");
  }
}

std::string feature_name(const std::vector<std::string>& names, std::size_t d) {
  return d < names.size() ? names[d] : "f" + std::to_string(d);
}

// Order-independent sum: add magnitudes after sorting.
double stable_sum(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

ContributionTrace local_trace(const model::Model& m, const data::TimeSeriesSample& sample,
                              const std::vector<std::string>& feature_names) {
  require_irnn(m, "local_trace");
  const model::IrnnTrace tr = model::irnn_forward(m, sample);
  ContributionTrace out;
  out.sample_id = sample.sample_id;
  out.features = m.features;
  for (std::size_t d = 0; d < m.features; ++d) {
    out.feature_names.push_back(feature_name(feature_names, d));
  }
  out.times.assign(sample.times.begin(), sample.times.begin() + tr.steps);
  out.logits = tr.logits;
  out.contributions = tr.contributions;
  out.bias = tr.bias;
  return out;
}

std::vector<double> time_average(const ContributionTrace& trace) {
  std::vector<double> u(trace.features, 0.0);
  if (trace.steps() == 0) {
    return u;
  }
  for (std::size_t t = 0; t < trace.steps(); ++t) {
    for (std::size_t d = 0; d < trace.features; ++d) {
      u[d] += trace.at(t, d);
    }
  }
  for (double& v : u) v /= static_cast<double>(trace.steps());
  return u;
}

GlobalImportance global_importance(const model::Model& m, const data::SampleRefs& samples,
                                   const std::vector<std::string>& feature_names) {
  require_irnn(m, "global_importance");
  if (samples.empty()) {
    throw DataError("global_importance: no samples");
  }
  std::vector<std::vector<double>> mags(m.features);
  for (const auto* s : samples) {
    const auto u = time_average(local_trace(m, *s));
    for (std::size_t d = 0; d < m.features; ++d) {
      mags[d].push_back(std::abs(u[d]));
    }
  }
  GlobalImportance out;
  for (std::size_t d = 0; d < m.features; ++d) {
    out.ranked.push_back({d, feature_name(feature_names, d),
                          stable_sum(mags[d]) / static_cast<double>(samples.size())});
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) {
                     return a.importance > b.importance;
                   });
  return out;
}

RiskCurve risk_curve(const model::Model& m, const data::SampleRefs& samples,
                     std::size_t feature, const RiskCurveOptions& options,
                     const data::NormStats* stats) {
  require_irnn(m, "risk_curve");
  if (feature >= m.features) {
    throw DimensionError("risk_curve: feature index out of range");
  }
  if (options.bins == 0) {
    throw ConfigError("risk_curve: bins must be positive");
  }
  if (stats && stats->size() != m.features) {
    throw DimensionError("risk_curve: normalization stats do not match the model");
  }

  std::vector<std::pair<double, double>> pts;
  for (const auto* s : samples) {
    const model::IrnnTrace tr = model::irnn_forward(m, *s);
    if (options.per_timestep) {
      bool seen = false;
      for (std::size_t t = 0; t < tr.steps; ++t) {
        seen = seen || s->observed(t, feature);
        if (seen) {
          pts.emplace_back(s->value(t, feature), tr.at(tr.contributions, t, feature));
        }
      }
      continue;
    }
    std::size_t last = tr.steps;
    for (std::size_t t = 0; t < tr.steps; ++t) {
      if (s->observed(t, feature)) last = t;
    }
    if (last == tr.steps) {
      continue;
    }
    double u = 0.0;
    for (std::size_t t = 0; t < tr.steps; ++t) {
      u += tr.at(tr.contributions, t, feature);
    }
    pts.emplace_back(s->value(last, feature), u / static_cast<double>(tr.steps));
  }
  if (pts.empty()) {
    throw DataError("risk_curve: feature " + std::to_string(feature) +
                    " is never observed in the given samples");
  }
  std::sort(pts.begin(), pts.end());

  std::size_t distinct = 1;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].first != pts[i - 1].first) ++distinct;
  }
  const std::size_t bins = std::min(options.bins, distinct);
  const std::size_t n = pts.size();

  RiskCurve out;
  out.feature = feature;
  out.name = stats ? stats->features[feature].name : "f" + std::to_string(feature);
  out.pooled_points = n;
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = b * n / bins;
    const std::size_t hi = (b + 1) * n / bins;
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      sx += pts[i].first;
      sy += pts[i].second;
    }
    const double cnt = static_cast<double>(hi - lo);
    out.centers.push_back(sx / cnt);
    out.mean_contribution.push_back(sy / cnt);
    out.counts.push_back(hi - lo);
  }
  if (stats) {
    for (double c : out.centers) {
      out.raw_centers.push_back(data::denormalize(c, stats->features[feature]));
    }
  }
  if (options.smooth) {
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = pts[i].first;
      y[i] = pts[i].second;
    }
    out.smoothed = lowess(x, y, out.centers, options.span);
  }
  return out;
}

std::vector<double> uniform_grid(std::size_t points) {
  if (points < 2) {
    throw ConfigError("uniform_grid needs at least 2 points");
  }
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

DecayCurve decay_curve(const model::Model& m, std::size_t feature,
                       std::span<const double> grid, const data::NormStats* stats) {
  require_irnn(m, "decay_curve");
  if (!m.irnn.gamma_diagonal) {
    throw ContractError("decay_curve: unsupported configuration (decay weights are dense)");
  }
  if (feature >= m.features) {
    throw DimensionError("decay_curve: feature index out of range");
  }
  const double w = m.params["gamma_weight"].data[feature];
  const double b = m.params["b_gamma"].data[feature];
  DecayCurve out;
  out.feature = feature;
  out.name = stats ? stats->features[feature].name : "f" + std::to_string(feature);
  for (double delta : grid) {
    out.delta.push_back(delta);
    out.gamma.push_back(std::max(0.0, w * delta + b));
    if (stats) {
      out.hours.push_back(delta * stats->features[feature].max_elapsed);
    }
  }
  return out;
}

std::vector<double> lowess(std::span<const double> x, std::span<const double> y,
                           std::span<const double> at, double span) {
  if (x.size() != y.size()) {
    throw DimensionError("lowess: x and y differ in length");
  }
  if (x.empty()) {
    throw DataError("lowess: no points");
  }
  if (!(span > 0.0 && span <= 1.0)) {
    throw ConfigError("lowess: span must lie in (0, 1]");
  }
  const std::size_t n = x.size();
  const std::size_t q =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(span * static_cast<double>(n))), 1, n);

  std::vector<double> dist(n);
  std::vector<double> out;
  out.reserve(at.size());
  for (double x0 : at) {
    for (std::size_t i = 0; i < n; ++i) dist[i] = std::abs(x[i] - x0);
    std::vector<double> sorted = dist;
    std::nth_element(sorted.begin(), sorted.begin() + (q - 1), sorted.end());
    double h = sorted[q - 1];

    double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double w;
      if (h <= 0.0) {
        w = dist[i] == 0.0 ? 1.0 : 0.0;
      } else {
        const double r = dist[i] / h;
        if (r >= 1.0) continue;
        const double c = 1.0 - r * r * r;
        w = c * c * c;
      }
      if (w == 0.0) continue;
      sw += w;
      swx += w * x[i];
      swy += w * y[i];
      swxx += w * x[i] * x[i];
      swxy += w * x[i] * y[i];
    }
    if (!(sw > 0.0)) {
      // Only boundary points in the window; fall back to their plain mean.
      double s = 0.0;
      std::size_t c = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (dist[i] <= h) {
          s += y[i];
          ++c;
        }
      }
      out.push_back(s / static_cast<double>(c));
      continue;
    }
    const double mx = swx / sw;
    const double my = swy / sw;
    const double sxx = swxx / sw - mx * mx;
    const double sxy = swxy / sw - mx * my;
    const double scale = std::max(1.0, mx * mx);
    if (sxx <= 1e-12 * scale) {
      out.push_back(my);
    } else {
      out.push_back(my + (sxy / sxx) * (x0 - mx));
    }
  }
  return out;
}

void write_trace_csv(const std::filesystem::path& path, const ContributionTrace& trace) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << "time,logit";
  for (const auto& name : trace.feature_names) out << ",c_" << name;
  out << '\n';
  for (std::size_t t = 0; t < trace.steps(); ++t) {
    out << text::format_double(trace.times[t]) << ',' << text::format_double(trace.logits[t]);
    for (std::size_t d = 0; d < trace.features; ++d) {
      out << ',' << text::format_double(trace.at(t, d));
    }
    out << '\n';
  }
}

nlohmann::json to_json(const GlobalImportance& importance) {
  nlohmann::json ranked = nlohmann::json::array();
  for (const auto& e : importance.ranked) {
    ranked.push_back({{"feature", e.name}, {"index", e.feature}, {"importance", e.importance}});
  }
  return {{"schema_version", kSchemaVersion}, {"ranked", ranked}};
}

nlohmann::json to_json(const RiskCurve& c) {
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"feature", c.name},
                      {"index", c.feature},
                      {"pooled_points", c.pooled_points},
                      {"centers", c.centers},
                      {"mean_contribution", c.mean_contribution},
                      {"counts", c.counts}};
  if (!c.raw_centers.empty()) j["raw_centers"] = c.raw_centers;
  if (!c.smoothed.empty()) j["smoothed"] = c.smoothed;
  return j;
}

nlohmann::json to_json(const DecayCurve& c) {
  nlohmann::json j = {{"schema_version", kSchemaVersion},
                      {"feature", c.name},
                      {"index", c.feature},
                      {"delta", c.delta},
                      {"gamma", c.gamma}};
  if (!c.hours.empty()) j["hours"] = c.hours;
  return j;
}

}  // namespace irnn::explain
