// SPDX-License-Identifier: Apache-2.0
//
// I-RNN cell stack and the baselines it is compared against. Every model
// is a kind tag plus a named ParamSet; forward passes record onto an
// nd::Tape so the same code serves inference and training.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "irnn/datapipe.hpp"
#include "irnn/ndcore.hpp"

namespace irnn::model {

enum class ModelKind { irnn, gru_forward, gru_simple, logistic };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct IrnnConfig {
  bool mu_diagonal = true;
  bool mu_static = false;
  bool gamma_diagonal = true;
};

struct Model {
  ModelKind kind = ModelKind::irnn;
  std::size_t features = 0;  // D
  std::size_t hidden = 0;    // hidden units; 0 for logistic
  IrnnConfig irnn;           // meaningful for kind == irnn only
  nd::ParamSet params;
};

Model make_irnn(std::size_t features, const IrnnConfig& config,
                std::uint64_t seed);
/// GRU-Forward (input x_t) or GRU-Simple (input [x_t; delta_t; m_t]) with
/// H = D hidden units.
Model make_dense_gru(ModelKind kind, std::size_t features, std::uint64_t seed);
Model make_logistic(std::size_t features, std::uint64_t seed);
Model make_model(ModelKind kind, std::size_t features, std::uint64_t seed,
                 const IrnnConfig& config = {});

/// Sets every parameter entry to zero.
void zero_parameters(Model& model);

std::size_t parameter_count(const Model& model);
std::size_t input_width(const Model& model);

/// One line per model: kind, D, hidden units, parameter count.
std::string summary(const Model& model);

// ------------------------------------------------------------ I-RNN parts

/// Parameter leaves of an I-RNN on one tape. mu_weight / b_mu are unset
/// when the baseline is static.
struct IrnnLeaves {
  nd::NodeId w_ir, w_iz, w_in, w_hr, w_hz, w_hn;
  nd::NodeId b_r, b_z, b_n;
  nd::NodeId mu_weight, b_mu;
  nd::NodeId gamma_weight, b_gamma;
  nd::NodeId w_out, b_out;
};

IrnnLeaves irnn_leaves(const Model& model, std::span<const nd::NodeId> leaves);

/// Diagonal-masked GRU update; component d of the result depends only on
/// component d of x and h_prev.
nd::NodeId masked_gru_step(nd::Tape& tape, const IrnnLeaves& p, nd::NodeId x,
                           nd::NodeId h_prev);

struct DecayResult {
  nd::NodeId h_hat, mu, gamma;
};

/// mu = W_mu x + b_mu (0 when static); gamma = max(0, W_gamma delta + b_gamma);
/// h_hat = mu + (h - mu) exp(-gamma).
DecayResult decay_step(nd::Tape& tape, const IrnnLeaves& p,
                       const IrnnConfig& config, nd::NodeId x, nd::NodeId h,
                       nd::NodeId delta);

struct HeadResult {
  nd::NodeId logit, contributions;
};

/// contributions = w_out ⊙ h_hat; logit = sum(contributions) + b_out.
HeadResult additive_head(nd::Tape& tape, nd::NodeId w_out, nd::NodeId b_out,
                         nd::NodeId h_hat);

/// Per-step internals over the valid steps, each T_valid x D row-major.
struct IrnnTrace {
  std::size_t steps = 0;
  std::size_t features = 0;
  std::vector<double> logits;  // T_valid
  std::vector<double> contributions, h, h_hat, mu, gamma;
  double bias = 0.0;

  double final_logit() const { return logits.back(); }
  double at(const std::vector<double>& grid, std::size_t t, std::size_t d) const {
    return grid[t * features + d];
  }
};

IrnnTrace irnn_forward(const Model& model, const data::TimeSeriesSample& sample);

// -------------------------------------------------------------- baselines

/// Per feature, over observed values in the valid steps:
/// max, min, mean, first, last, population variance. Layout is
/// [f0.max, f0.min, f0.mean, f0.first, f0.last, f0.var, f1.max, ...].
/// Never-observed features contribute six zeros.
std::vector<double> summarize_features(const data::TimeSeriesSample& sample);

/// w · summary + b.
double logistic_forward(std::span<const double> weights, double bias,
                        std::span<const double> summary);

/// Logit per valid step for the recurrent models; a single entry for
/// logistic.
std::vector<double> forward_logits(const Model& model,
                                   const data::TimeSeriesSample& sample);

// ---------------------------------------------------------- tape records

/// Binds one parameter leaf per ParamSet entry, in index order.
std::vector<nd::NodeId> bind_parameters(nd::Tape& tape, const Model& model);

/// Records the forward pass and returns the logit at step valid_len - 1.
/// `leaves` must come from bind_parameters (or gradcheck) for `model`.
nd::NodeId record_final_logit(nd::Tape& tape, const Model& model,
                              std::span<const nd::NodeId> leaves,
                              const data::TimeSeriesSample& sample);

/// Final-step logit using `scratch` as working tape.
double predict_logit(const Model& model, const data::TimeSeriesSample& sample,
                     nd::Tape& scratch);

std::vector<double> predict_logits(const Model& model,
                                   const data::SampleRefs& samples);

}  // namespace irnn::model
