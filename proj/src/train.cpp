// SPDX-License-Identifier: Apache-2.0
#include "irnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "irnn/metrics.hpp"
#include "irnn/parallel.hpp"
#include "irnn/text.hpp"

namespace irnn::train {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;

std::vector<int> labels_of(const data::SampleRefs& samples) {
  std::vector<int> y;
  y.reserve(samples.size());
  for (const auto* s : samples) {
    y.push_back(s->label);
  }
  return y;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (patience > max_epochs) throw ConfigError("patience must not exceed max_epochs");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in (0,1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
}

TrainConfig train_config_from(const config::KeyValues& kv, TrainConfig base) {
  auto count = [&](const char* key, std::size_t fallback) {
    const auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) {
      throw ConfigError(std::string(key) + " must not be negative");
    }
    return static_cast<std::size_t>(v);
  };
  base.learning_rate = kv.get_double("learning_rate", base.learning_rate);
  base.clip_norm = kv.get_double("clip_norm", base.clip_norm);
  base.batch_size = count("batch_size", base.batch_size);
  base.max_epochs = count("max_epochs", base.max_epochs);
  base.patience = count("patience", base.patience);
  base.beta1 = kv.get_double("beta1", base.beta1);
  base.beta2 = kv.get_double("beta2", base.beta2);
  base.eps = kv.get_double("eps", base.eps);
  base.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(base.seed)));
  base.validate();
  return base;
}

double bce_loss(double logit, int label) {
  if (!std::isfinite(logit)) {
    throw NumericError("bce_loss: non-finite logit");
  }
  if (label != 0 && label != 1) {
    throw ContractError("bce_loss: label must be 0 or 1");
  }
  return std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
}

double global_norm(const nd::Gradients& grads) {
  double ss = 0.0;
  for (const auto& g : grads) {
    for (double v : g.data) {
      ss += v * v;
    }
  }
  return std::sqrt(ss);
}

double clip_gradients(nd::Gradients& grads, double clip_norm) {
  if (!(clip_norm > 0.0)) {
    throw ContractError("clip_norm must be positive");
  }
  const double g = global_norm(grads);
  if (g > clip_norm) {
    const double factor = clip_norm / g;
    for (auto& t : grads) {
      for (double& v : t.data) {
        v *= factor;
      }
    }
  }
  return g;
}

AdamState make_adam_state(const nd::ParamSet& params) {
  AdamState s;
  s.m = nd::zeros_like(params);
  s.v = nd::zeros_like(params);
  return s;
}

void adam_step(nd::ParamSet& params, AdamState& state, const nd::Gradients& grads,
               double lr, double beta1, double beta2, double eps, std::size_t t) {
  if (t == 0) {
    throw ContractError("adam_step: step index starts at 1");
  }
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw DimensionError("adam_step: parameter/gradient count mismatch");
  }
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& w = params.at(p).data;
    auto& m = state.m[p].data;
    auto& v = state.v[p].data;
    const auto& g = grads[p].data;
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      w[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << "epoch,train_loss,val_auc\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << text::format_double(e.train_loss) << ','
        << text::format_double(e.val_auc) << '\n';
  }
}

TrainResult train_from(model::Model current, const data::SampleRefs& train,
                       const data::SampleRefs& validation, const TrainConfig& config) {
  config.validate();
  if (train.empty()) {
    throw DataError("training set is empty");
  }
  const std::vector<int> val_labels = labels_of(validation);
  const auto positives = std::count(val_labels.begin(), val_labels.end(), 1);
  if (positives == 0 || positives == static_cast<long>(val_labels.size())) {
    throw DataError("validation set must contain both classes (AUC is undefined otherwise)");
  }

  std::mt19937_64 shuffle_rng(derive_seed(config.seed, kShuffleStream));
  AdamState adam = make_adam_state(current.params);
  nd::Gradients grads = nd::zeros_like(current.params);
  nd::Tape tape;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;

  TrainResult result;
  result.model = current;
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      for (auto& g : grads) {
        std::fill(g.data.begin(), g.data.end(), 0.0);
      }
      for (std::size_t i = start; i < end; ++i) {
        const data::TimeSeriesSample& s = *train[order[i]];
        tape.clear();
        const auto leaves = model::bind_parameters(tape, current);
        const nd::NodeId logit = model::record_final_logit(tape, current, leaves, s);
        const nd::NodeId loss = tape.bce_with_logits(logit, s.label);
        loss_sum += tape.scalar(loss);
        tape.backward(loss, grads, weight);
      }
      clip_gradients(grads, config.clip_norm);
      adam_step(current.params, adam, grads, config.learning_rate, config.beta1,
                config.beta2, config.eps, ++step);
    }

    const auto scores = model::predict_logits(current, validation);
    const double val_auc = metrics::auc(scores, val_labels);
    result.history.epochs.push_back(
        {epoch, loss_sum / static_cast<double>(train.size()), val_auc});
    if (!have_best || val_auc > result.history.best_val_auc) {
      have_best = true;
      result.history.best_val_auc = val_auc;
      result.history.best_epoch = epoch;
      result.model = current;
    } else if (epoch - result.history.best_epoch > config.patience) {
      break;
    }
  }
  return result;
}

TrainResult train_model(const ModelSpec& spec, const data::SampleRefs& train,
                        const data::SampleRefs& validation, const TrainConfig& config) {
  return train_from(model::make_model(spec.kind, spec.features,
                                      derive_seed(config.seed, kInitStream), spec.irnn),
                    train, validation, config);
}

GridResult grid_search(const ModelSpec& spec, const data::SampleRefs& train,
                       const data::SampleRefs& validation, const TrainConfig& base,
                       const std::vector<double>& learning_rates,
                       const std::vector<double>& clip_norms, std::size_t jobs) {
  if (learning_rates.empty() || clip_norms.empty()) {
    throw ConfigError("grid_search needs at least one learning rate and one clip norm");
  }
  std::vector<TrainConfig> configs;
  for (double lr : learning_rates) {
    for (double clip : clip_norms) {
      TrainConfig c = base;
      c.learning_rate = lr;
      c.clip_norm = clip;
      c.validate();
      configs.push_back(c);
    }
  }
  std::vector<TrainResult> results(configs.size());
  parallel_for(configs.size(), jobs, [&](std::size_t i) {
    results[i] = train_model(spec, train, validation, configs[i]);
  });

  GridResult out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    out.cells.push_back({configs[i].learning_rate, configs[i].clip_norm,
                         results[i].history.best_val_auc, results[i].history});
    const auto& b = configs[best];
    const auto& c = configs[i];
    const double auc_b = results[best].history.best_val_auc;
    const double auc_c = results[i].history.best_val_auc;
    if (auc_c > auc_b ||
        (auc_c == auc_b && (c.learning_rate < b.learning_rate ||
                            (c.learning_rate == b.learning_rate && c.clip_norm < b.clip_norm)))) {
      best = i;
    }
  }
  out.best_config = configs[best];
  out.best = std::move(results[best]);
  return out;
}

}  // namespace irnn::train
