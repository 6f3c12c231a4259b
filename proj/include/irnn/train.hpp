// SPDX-License-Identifier: Apache-2.0
//
// Final-step binary cross-entropy training with Adam, global-norm clipping,
// mini-batches and early stopping on validation AUC.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "irnn/datapipe.hpp"
#include "irnn/kvconfig.hpp"
#include "irnn/model.hpp"
#include "irnn/ndcore.hpp"

namespace irnn::train {

struct TrainConfig {
  double learning_rate = 0.001;
  double clip_norm = 10.0;
  std::size_t batch_size = 512;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Reads learning_rate, clip_norm, batch_size, max_epochs, patience, beta1,
/// beta2, eps and seed; absent keys keep `base` values.
TrainConfig train_config_from(const config::KeyValues& kv, TrainConfig base = {});

/// max(z, 0) - z*y + log(1 + exp(-|z|)).
double bce_loss(double logit, int label);

double global_norm(const nd::Gradients& grads);

/// Rescales all gradients by clip_norm / g when the global L2 norm g
/// exceeds clip_norm. Returns g.
double clip_gradients(nd::Gradients& grads, double clip_norm);

struct AdamState {
  std::vector<nd::Tensor> m;
  std::vector<nd::Tensor> v;
};

AdamState make_adam_state(const nd::ParamSet& params);

/// Bias-corrected Adam update for step index t >= 1.
void adam_step(nd::ParamSet& params, AdamState& state, const nd::Gradients& grads,
               double lr, double beta1, double beta2, double eps, std::size_t t);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
};

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);

struct ModelSpec {
  model::ModelKind kind = model::ModelKind::irnn;
  std::size_t features = 0;
  model::IrnnConfig irnn;
};

struct TrainResult {
  model::Model model;  // snapshot at the best validation epoch
  TrainHistory history;
};

/// Trains from a fresh initialization drawn from config.seed. Stops after
/// max_epochs or once more than `patience` consecutive epochs fail to
/// raise validation AUC.
TrainResult train_model(const ModelSpec& spec, const data::SampleRefs& train,
                        const data::SampleRefs& validation, const TrainConfig& config);

/// Continues training an existing model; used by train_model.
TrainResult train_from(model::Model initial, const data::SampleRefs& train,
                       const data::SampleRefs& validation, const TrainConfig& config);

struct GridCell {
  double learning_rate = 0.0;
  double clip_norm = 0.0;
  double best_val_auc = 0.0;
  TrainHistory history;
};

struct GridResult {
  TrainConfig best_config;
  TrainResult best;
  std::vector<GridCell> cells;  // learning-rate major, in the given order
};

/// Trains every (learning rate, clip norm) cell independently from the same
/// base config. Winner has the highest validation AUC; ties go to the lower
/// learning rate, then the lower clip norm.
GridResult grid_search(const ModelSpec& spec, const data::SampleRefs& train,
                       const data::SampleRefs& validation, const TrainConfig& base,
                       const std::vector<double>& learning_rates,
                       const std::vector<double>& clip_norms, std::size_t jobs = 1);

}  // namespace irnn::train
