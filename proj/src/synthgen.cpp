// SPDX-License-Identifier: Apache-2.0
#include "irnn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "irnn/errors.hpp"
#include "irnn/parallel.hpp"

namespace irnn::synth {

namespace {

constexpr std::uint64_t kSampleStreamBase = 1000;

// Exact OU transition for unit stationary variance.
double ou_step(double z, double dt, double theta, std::mt19937_64& rng) {
  const double a = std::exp(-theta * dt);
  std::normal_distribution<double> noise(0.0, 1.0);
  return z * a + std::sqrt(std::max(0.0, 1.0 - a * a)) * noise(rng);
}

struct SampleDraw {
  data::EventGroup group;
  double log_odds = 0.0;
  int label = 0;
};

SampleDraw draw_sample(const GeneratorConfig& c, std::size_t index) {
  std::mt19937_64 rng(derive_seed(c.seed, kSampleStreamBase + index));
  std::uniform_real_distribution<double> unif(0.0, c.horizon);
  std::normal_distribution<double> normal(0.0, 1.0);

  SampleDraw out;
  out.group.sample_id = "s" + std::to_string(index);
  double eta = c.intercept;
  for (std::size_t d = 0; d < c.size(); ++d) {
    const FeatureSpec& f = c.features[d];
    std::poisson_distribution<int> count(f.rate * c.horizon);
    const int n = count(rng);
    std::vector<double> times(static_cast<std::size_t>(n));
    for (double& t : times) t = unif(rng);
    std::sort(times.begin(), times.end());

    const bool trend_here = c.trend && d == c.trend_feature;
    double anchor = -1.0;
    if (trend_here && !times.empty()) {
      anchor = std::max(0.0, times.back() - c.trend_window);
    }

    // Walk the latent path through observation times, visiting the trend
    // anchor on the way.
    double z = normal(rng);
    double now = 0.0;
    double z_anchor = z;
    bool anchor_done = anchor < 0.0;
    for (double t : times) {
      if (!anchor_done && anchor <= t) {
        z = ou_step(z, anchor - now, f.theta, rng);
        now = anchor;
        z_anchor = z;
        anchor_done = true;
      }
      z = ou_step(z, t - now, f.theta, rng);
      now = t;
      out.group.events.push_back({out.group.sample_id, t, f.name, f.offset + f.scale * z});
    }
    const double z_last = times.empty() ? 0.0 : z;
    eta += risk_value(f.risk, f.coef, z_last);
    if (trend_here && !times.empty()) {
      eta += c.trend_coef * (z_last - z_anchor) / c.trend_window;
    }
  }
  std::stable_sort(out.group.events.begin(), out.group.events.end(),
                   [](const data::EventRecord& a, const data::EventRecord& b) {
                     return a.time < b.time;
                   });
  out.log_odds = eta;
  const double p = 1.0 / (1.0 + std::exp(-eta / c.temperature));
  std::bernoulli_distribution coin(p);
  out.label = coin(rng) ? 1 : 0;
  return out;
}

}  // namespace

std::string to_string(RiskKind kind) {
  switch (kind) {
    case RiskKind::null: return "null";
    case RiskKind::linear: return "linear";
    case RiskKind::u_shaped: return "u_shaped";
    case RiskKind::saturating: return "saturating";
  }
  return "null";
}

RiskKind parse_risk_kind(std::string_view name) {
  if (name == "null") return RiskKind::null;
  if (name == "linear") return RiskKind::linear;
  if (name == "u_shaped") return RiskKind::u_shaped;
  if (name == "saturating") return RiskKind::saturating;
  throw ConfigError("unknown risk function '" + std::string(name) +
                    "' (expected null, linear, u_shaped or saturating)");
}

double risk_value(RiskKind kind, double coef, double z) {
  switch (kind) {
    case RiskKind::null: return 0.0;
    case RiskKind::linear: return coef * z;
    case RiskKind::u_shaped: return coef * (z * z - 1.0);
    case RiskKind::saturating: return coef * std::tanh(1.5 * z);
  }
  return 0.0;
}

std::vector<std::string> GeneratorConfig::names() const {
  std::vector<std::string> out;
  for (const auto& f : features) out.push_back(f.name);
  return out;
}

void GeneratorConfig::validate() const {
  if (features.empty()) throw ConfigError("synth: D (feature count) must be at least 1");
  if (n_samples == 0) throw ConfigError("synth: n_samples must be positive");
  if (!(horizon > 0.0)) throw ConfigError("synth: horizon must be positive");
  if (!(temperature > 0.0)) throw ConfigError("synth: temperature must be positive");
  bool any_signal = trend && trend_coef != 0.0;
  for (std::size_t d = 0; d < features.size(); ++d) {
    const auto& f = features[d];
    if (f.name.empty()) throw ConfigError("synth: feature " + std::to_string(d) + " has no name");
    for (std::size_t e = 0; e < d; ++e) {
      if (features[e].name == f.name) throw ConfigError("synth: duplicate feature name " + f.name);
    }
    if (!(f.rate > 0.0)) throw ConfigError("synth: rate of " + f.name + " must be positive");
    if (!(f.theta > 0.0)) throw ConfigError("synth: theta of " + f.name + " must be positive");
    if (!(f.scale > 0.0)) throw ConfigError("synth: scale of " + f.name + " must be positive");
    if (f.risk != RiskKind::null && f.coef != 0.0) any_signal = true;
  }
  if (trend && trend_feature >= features.size()) {
    throw ConfigError("synth: trend_feature out of range");
  }
  if (trend && !(trend_window > 0.0)) throw ConfigError("synth: trend_window must be positive");
  if (!any_signal && !control) {
    throw ConfigError("synth: at least one non-null risk function or a trend is required");
  }
}

GeneratorConfig default_config() {
  GeneratorConfig c;
  c.features = {
      {"linear", 2.0, 0.3, RiskKind::linear, 1.0, 80.0, 12.0},
      {"u_shaped", 1.0, 0.3, RiskKind::u_shaped, 0.8, 120.0, 15.0},
      {"saturating", 0.5, 0.3, RiskKind::saturating, 1.2, 7.4, 0.05},
      {"trend", 4.0, 0.5, RiskKind::null, 0.0, 60.0, 8.0},
      {"null_a", 1.0, 0.3, RiskKind::null, 0.0, 37.0, 0.6},
      {"null_b", 0.5, 0.3, RiskKind::null, 0.0, 2.0, 0.4},
      {"null_c", 2.0, 0.3, RiskKind::null, 0.0, 140.0, 4.0},
      {"null_d", 1.0, 0.3, RiskKind::null, 0.0, 95.0, 3.0},
  };
  c.n_samples = 20000;
  c.horizon = 6.0;
  c.trend = true;
  c.trend_feature = 3;
  c.trend_coef = 1.0;
  c.trend_window = 2.0;
  c.temperature = 1.0;
  c.intercept = -1.0;
  c.seed = 0;
  return c;
}

GeneratorConfig null_config() {
  GeneratorConfig c = default_config();
  for (auto& f : c.features) {
    f.risk = RiskKind::null;
    f.coef = 0.0;
  }
  c.trend = false;
  c.trend_coef = 0.0;
  c.intercept = 0.0;
  c.control = true;
  return c;
}

GeneratorConfig config_from(const config::KeyValues& kv) {
  static const std::set<std::string> allowed = {
      "preset", "n_samples", "horizon", "seed", "temperature", "intercept",
      "trend", "trend_feature", "trend_coef", "trend_window", "control",
      "names", "rates", "thetas", "risks", "coefs", "offsets", "scales"};
  kv.require_known(allowed);
  const std::string preset = kv.get_string("preset", "default");
  GeneratorConfig c;
  if (preset == "default") {
    c = default_config();
  } else if (preset == "null") {
    c = null_config();
  } else {
    throw ConfigError("synth: unknown preset '" + preset + "' (expected default or null)");
  }

  if (kv.has("names")) {
    auto names = kv.get_strings("names", {});
    if (names.size() == 1 && names[0].empty()) names.clear();
    c.features.resize(names.size());
    for (std::size_t d = 0; d < names.size(); ++d) c.features[d].name = names[d];
  }
  const std::size_t D = c.features.size();
  auto per_feature = [&](const char* key, auto setter) {
    if (!kv.has(key)) return;
    const auto v = kv.get_doubles(key, {});
    if (v.size() != D) {
      throw ConfigError(std::string("synth: ") + key + " needs " + std::to_string(D) + " entries");
    }
    for (std::size_t d = 0; d < D; ++d) setter(c.features[d], v[d]);
  };
  per_feature("rates", [](FeatureSpec& f, double v) { f.rate = v; });
  per_feature("thetas", [](FeatureSpec& f, double v) { f.theta = v; });
  per_feature("coefs", [](FeatureSpec& f, double v) { f.coef = v; });
  per_feature("offsets", [](FeatureSpec& f, double v) { f.offset = v; });
  per_feature("scales", [](FeatureSpec& f, double v) { f.scale = v; });
  if (kv.has("risks")) {
    const auto v = kv.get_strings("risks", {});
    if (v.size() != D) {
      throw ConfigError("synth: risks needs " + std::to_string(D) + " entries");
    }
    for (std::size_t d = 0; d < D; ++d) c.features[d].risk = parse_risk_kind(v[d]);
  }

  const auto n = kv.get_int("n_samples", static_cast<std::int64_t>(c.n_samples));
  if (n <= 0) throw ConfigError("synth: n_samples must be positive");
  c.n_samples = static_cast<std::size_t>(n);
  c.horizon = kv.get_double("horizon", c.horizon);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
  c.temperature = kv.get_double("temperature", c.temperature);
  c.intercept = kv.get_double("intercept", c.intercept);
  c.trend = kv.get_bool("trend", c.trend);
  const auto tf = kv.get_int("trend_feature", static_cast<std::int64_t>(c.trend_feature));
  if (tf < 0) throw ConfigError("synth: trend_feature must not be negative");
  c.trend_feature = static_cast<std::size_t>(tf);
  c.trend_coef = kv.get_double("trend_coef", c.trend_coef);
  c.trend_window = kv.get_double("trend_window", c.trend_window);
  c.control = kv.get_bool("control", c.control);
  c.validate();
  return c;
}

nlohmann::json to_json(const GeneratorConfig& c) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : c.features) {
    features.push_back({{"name", f.name},
                        {"rate", f.rate},
                        {"theta", f.theta},
                        {"risk", to_string(f.risk)},
                        {"coef", f.coef},
                        {"offset", f.offset},
                        {"scale", f.scale}});
  }
  return {{"n_samples", c.n_samples},
          {"horizon", c.horizon},
          {"trend", c.trend},
          {"trend_feature", c.trend_feature},
          {"trend_coef", c.trend_coef},
          {"trend_window", c.trend_window},
          {"temperature", c.temperature},
          {"intercept", c.intercept},
          {"seed", c.seed},
          {"control", c.control},
          {"features", features}};
}

SynthDataset generate(const GeneratorConfig& config, std::size_t jobs) {
  config.validate();
  std::vector<SampleDraw> draws(config.n_samples);
  parallel_for(config.n_samples, jobs,
               [&](std::size_t i) { draws[i] = draw_sample(config, i); });
  SynthDataset ds;
  ds.config = config;
  ds.samples.reserve(draws.size());
  for (auto& d : draws) {
    ds.samples.push_back(std::move(d.group));
    ds.labels.push_back(d.label);
    ds.log_odds.push_back(d.log_odds);
  }
  return ds;
}

std::vector<double> true_risk(const GeneratorConfig& config, std::size_t feature,
                              std::span<const double> grid) {
  if (feature >= config.size()) {
    throw DimensionError("true_risk: feature index out of range");
  }
  const auto& f = config.features[feature];
  std::vector<double> out;
  out.reserve(grid.size());
  for (double z : grid) out.push_back(risk_value(f.risk, f.coef, z));
  return out;
}

void write_dataset(const std::filesystem::path& dir, const SynthDataset& ds) {
  std::filesystem::create_directories(dir);
  data::write_long_csv(dir / "events.csv", ds.samples);
  std::vector<std::string> ids;
  for (const auto& g : ds.samples) ids.push_back(g.sample_id);
  data::write_labels_csv(dir / "labels.csv", ids, ds.labels);

  nlohmann::json log_odds = nlohmann::json::object();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    log_odds[ds.samples[i].sample_id] = ds.log_odds[i];
  }
  nlohmann::json truth = {{"schema_version", kSchemaVersion},
                          {"config", to_json(ds.config)},
                          {"log_odds", log_odds}};
  std::ofstream out(dir / "truth.json");
  if (!out) {
    throw DataError("cannot write " + (dir / "truth.json").string());
  }
  out << truth.dump(2) << '\n';
}

}  // namespace irnn::synth
