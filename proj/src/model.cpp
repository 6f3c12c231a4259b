// SPDX-License-Identifier: Apache-2.0
#include "irnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace irnn::model {

using nd::NodeId;
using nd::Tape;
using nd::Tensor;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::irnn: return "irnn";
    case ModelKind::gru_forward: return "gru_forward";
    case ModelKind::gru_simple: return "gru_simple";
    case ModelKind::logistic: return "logistic";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "irnn") return ModelKind::irnn;
  if (name == "gru_forward") return ModelKind::gru_forward;
  if (name == "gru_simple") return ModelKind::gru_simple;
  if (name == "logistic") return ModelKind::logistic;
  throw ConfigError("unknown model '" + std::string(name) +
                    "' (expected irnn, gru_forward, gru_simple, logistic)");
}

// -------------------------------------------------------- construction

namespace {

class Initializer {
 public:
  Initializer(std::uint64_t seed, std::size_t fan) : rng_(seed) {
    const double a = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan, 1)));
    dist_ = std::uniform_real_distribution<double>(-a, a);
  }

  Tensor uniform(std::vector<std::size_t> shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data) {
      v = dist_(rng_);
    }
    return t;
  }

  static Tensor constant(std::vector<std::size_t> shape, double value) {
    Tensor t = Tensor::zeros(std::move(shape));
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
  }

 private:
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> dist_;
};

void require_features(std::size_t d) {
  if (d == 0) {
    throw ConfigError("feature count D must be at least 1");
  }
}

}  // namespace

Model make_irnn(std::size_t D, const IrnnConfig& config, std::uint64_t seed) {
  require_features(D);
  Model m;
  m.kind = ModelKind::irnn;
  m.features = D;
  m.hidden = D;
  m.irnn = config;
  Initializer init(seed, D);
  for (const char* name : {"w_ir", "w_iz", "w_in", "w_hr", "w_hz", "w_hn"}) {
    m.params.add(name, init.uniform({D}));
  }
  for (const char* name : {"b_r", "b_z", "b_n"}) {
    m.params.add(name, Initializer::constant({D}, 0.0));
  }
  if (!config.mu_static) {
    m.params.add("mu_weight", config.mu_diagonal ? init.uniform({D})
                                                 : init.uniform({D, D}));
    m.params.add("b_mu", Initializer::constant({D}, 0.0));
  }
  m.params.add("gamma_weight", config.gamma_diagonal ? init.uniform({D})
                                                     : init.uniform({D, D}));
  m.params.add("b_gamma", Initializer::constant({D}, 0.1));
  m.params.add("w_out", init.uniform({D}));
  m.params.add("b_out", Initializer::constant({1}, 0.0));
  return m;
}

Model make_dense_gru(ModelKind kind, std::size_t D, std::uint64_t seed) {
  require_features(D);
  if (kind != ModelKind::gru_forward && kind != ModelKind::gru_simple) {
    throw ContractError("make_dense_gru expects gru_forward or gru_simple");
  }
  Model m;
  m.kind = kind;
  m.features = D;
  m.hidden = D;
  const std::size_t H = D;
  const std::size_t in = kind == ModelKind::gru_simple ? 3 * D : D;
  Initializer init(seed, H);
  for (const char* name : {"W_ir", "W_iz", "W_in"}) {
    m.params.add(name, init.uniform({H, in}));
  }
  for (const char* name : {"W_hr", "W_hz", "W_hn"}) {
    m.params.add(name, init.uniform({H, H}));
  }
  for (const char* name : {"b_r", "b_z", "b_n"}) {
    m.params.add(name, Initializer::constant({H}, 0.0));
  }
  m.params.add("w_out", init.uniform({1, H}));
  m.params.add("b_out", Initializer::constant({1}, 0.0));
  return m;
}

Model make_logistic(std::size_t D, std::uint64_t seed) {
  require_features(D);
  Model m;
  m.kind = ModelKind::logistic;
  m.features = D;
  m.hidden = 0;
  Initializer init(seed, D);
  m.params.add("w", init.uniform({1, 6 * D}));
  m.params.add("b", Initializer::constant({1}, 0.0));
  return m;
}

Model make_model(ModelKind kind, std::size_t D, std::uint64_t seed,
                 const IrnnConfig& config) {
  switch (kind) {
    case ModelKind::irnn: return make_irnn(D, config, seed);
    case ModelKind::gru_forward:
    case ModelKind::gru_simple: return make_dense_gru(kind, D, seed);
    case ModelKind::logistic: return make_logistic(D, seed);
  }
  throw ContractError("unhandled model kind");
}

void zero_parameters(Model& model) {
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    auto& t = model.params.at(i);
    std::fill(t.data.begin(), t.data.end(), 0.0);
  }
}

std::size_t parameter_count(const Model& model) {
  return model.params.scalar_count();
}

std::size_t input_width(const Model& model) {
  switch (model.kind) {
    case ModelKind::gru_simple: return 3 * model.features;
    case ModelKind::logistic: return 6 * model.features;
    default: return model.features;
  }
}

std::string summary(const Model& model) {
  std::ostringstream os;
  os << to_string(model.kind) << ": D=" << model.features
     << " hidden=" << model.hidden << " input_width=" << input_width(model)
     << " parameters=" << parameter_count(model);
  return os.str();
}

// ---------------------------------------------------------------- I-RNN

IrnnLeaves irnn_leaves(const Model& model, std::span<const NodeId> leaves) {
  if (model.kind != ModelKind::irnn) {
    throw ContractError("irnn_leaves on a non-I-RNN model");
  }
  if (leaves.size() != model.params.size()) {
    throw ContractError("leaf count does not match parameter count");
  }
  const auto& p = model.params;
  auto get = [&](const char* name) { return leaves[p.index_of(name)]; };
  IrnnLeaves l{};
  l.w_ir = get("w_ir");
  l.w_iz = get("w_iz");
  l.w_in = get("w_in");
  l.w_hr = get("w_hr");
  l.w_hz = get("w_hz");
  l.w_hn = get("w_hn");
  l.b_r = get("b_r");
  l.b_z = get("b_z");
  l.b_n = get("b_n");
  if (!model.irnn.mu_static) {
    l.mu_weight = get("mu_weight");
    l.b_mu = get("b_mu");
  }
  l.gamma_weight = get("gamma_weight");
  l.b_gamma = get("b_gamma");
  l.w_out = get("w_out");
  l.b_out = get("b_out");
  return l;
}

NodeId masked_gru_step(Tape& tape, const IrnnLeaves& p, NodeId x, NodeId h_prev) {
  const NodeId r = tape.sigmoid(
      tape.add(tape.diag_affine(p.w_ir, x, p.b_r), tape.hadamard(p.w_hr, h_prev)));
  const NodeId z = tape.sigmoid(
      tape.add(tape.diag_affine(p.w_iz, x, p.b_z), tape.hadamard(p.w_hz, h_prev)));
  const NodeId n = tape.tanh(tape.add(tape.diag_affine(p.w_in, x, p.b_n),
                                      tape.hadamard(p.w_hn, tape.hadamard(r, h_prev))));
  return tape.add(tape.hadamard(tape.one_minus(z), h_prev), tape.hadamard(z, n));
}

DecayResult decay_step(Tape& tape, const IrnnLeaves& p, const IrnnConfig& config,
                       NodeId x, NodeId h, NodeId delta) {
  NodeId mu;
  if (config.mu_static) {
    const std::vector<double> zeros(tape.value(h).size(), 0.0);
    mu = tape.constant(zeros);
  } else if (config.mu_diagonal) {
    mu = tape.diag_affine(p.mu_weight, x, p.b_mu);
  } else {
    mu = tape.dense_affine(p.mu_weight, x, p.b_mu);
  }
  const NodeId pre = config.gamma_diagonal
                         ? tape.diag_affine(p.gamma_weight, delta, p.b_gamma)
                         : tape.dense_affine(p.gamma_weight, delta, p.b_gamma);
  const NodeId gamma = tape.max0(pre);
  // h*e + mu*(1-e) equals mu + (h - mu)e and keeps h exact when gamma = 0.
  const NodeId e = tape.exp_neg(gamma);
  const NodeId h_hat =
      tape.add(tape.hadamard(h, e), tape.hadamard(mu, tape.one_minus(e)));
  return {h_hat, mu, gamma};
}

HeadResult additive_head(Tape& tape, NodeId w_out, NodeId b_out, NodeId h_hat) {
  const NodeId c = tape.hadamard(w_out, h_hat);
  return {tape.add(tape.sum(c), b_out), c};
}

namespace {

void require_valid(const data::TimeSeriesSample& s, std::size_t D) {
  if (s.valid_len == 0) {
    throw ContractError("sample '" + s.sample_id + "' has valid_len 0");
  }
  if (s.features != D) {
    throw DimensionError("sample has " + std::to_string(s.features) +
                         " features, model expects " + std::to_string(D));
  }
}

void append(std::vector<double>& dst, std::span<const double> v) {
  dst.insert(dst.end(), v.begin(), v.end());
}

}  // namespace

IrnnTrace irnn_forward(const Model& model, const data::TimeSeriesSample& sample) {
  if (model.kind != ModelKind::irnn) {
    throw ContractError("irnn_forward on a " + to_string(model.kind) + " model");
  }
  require_valid(sample, model.features);
  const std::size_t D = model.features;
  Tape tape;
  const auto leaves = bind_parameters(tape, model);
  const IrnnLeaves p = irnn_leaves(model, leaves);

  IrnnTrace tr;
  tr.steps = sample.valid_len;
  tr.features = D;
  tr.bias = model.params["b_out"].data[0];
  const std::vector<double> zeros(D, 0.0);
  NodeId h_hat = tape.constant(zeros);
  for (std::size_t t = 0; t < sample.valid_len; ++t) {
    const NodeId x = tape.constant(sample.value_row(t));
    const NodeId delta = tape.constant(sample.elapsed_row(t));
    const NodeId h = masked_gru_step(tape, p, x, h_hat);
    const DecayResult dec = decay_step(tape, p, model.irnn, x, h, delta);
    h_hat = dec.h_hat;
    const HeadResult head = additive_head(tape, p.w_out, p.b_out, h_hat);
    tr.logits.push_back(tape.scalar(head.logit));
    append(tr.contributions, tape.value(head.contributions));
    append(tr.h, tape.value(h));
    append(tr.h_hat, tape.value(dec.h_hat));
    append(tr.mu, tape.value(dec.mu));
    append(tr.gamma, tape.value(dec.gamma));
  }
  return tr;
}

// ------------------------------------------------------------ baselines

std::vector<double> summarize_features(const data::TimeSeriesSample& sample) {
  const std::size_t D = sample.features;
  std::vector<double> out(6 * D, 0.0);
  for (std::size_t d = 0; d < D; ++d) {
    std::size_t n = 0;
    double mx = 0, mn = 0, sum = 0, first = 0, last = 0;
    for (std::size_t t = 0; t < sample.valid_len; ++t) {
      if (!sample.observed(t, d)) {
        continue;
      }
      const double v = sample.value(t, d);
      if (n == 0) {
        mx = mn = first = v;
      }
      mx = std::max(mx, v);
      mn = std::min(mn, v);
      sum += v;
      last = v;
      ++n;
    }
    if (n == 0) {
      continue;
    }
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    if (n > 1) {
      for (std::size_t t = 0; t < sample.valid_len; ++t) {
        if (sample.observed(t, d)) {
          const double dv = sample.value(t, d) - mean;
          var += dv * dv;
        }
      }
      var /= static_cast<double>(n);
    }
    double* o = out.data() + 6 * d;
    o[0] = mx;
    o[1] = mn;
    o[2] = mean;
    o[3] = first;
    o[4] = last;
    o[5] = var;
  }
  return out;
}

double logistic_forward(std::span<const double> weights, double bias,
                        std::span<const double> summary) {
  if (weights.size() != summary.size()) {
    throw DimensionError("logistic_forward: weight and summary lengths differ");
  }
  Tape tape;
  const NodeId w = tape.constant(Tensor::matrix(
      1, weights.size(), std::vector<double>(weights.begin(), weights.end())));
  const double b[1] = {bias};
  return tape.scalar(
      tape.dense_affine(w, tape.constant(summary), tape.constant(std::span<const double>(b))));
}

std::vector<NodeId> bind_parameters(Tape& tape, const Model& model) {
  std::vector<NodeId> leaves;
  leaves.reserve(model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    leaves.push_back(tape.parameter(i, model.params.at(i)));
  }
  return leaves;
}

namespace {

struct DenseGruLeaves {
  NodeId W_ir, W_iz, W_in, W_hr, W_hz, W_hn, b_r, b_z, b_n, w_out, b_out;
};

DenseGruLeaves dense_leaves(const Model& model, std::span<const NodeId> leaves) {
  const auto& p = model.params;
  auto get = [&](const char* name) { return leaves[p.index_of(name)]; };
  return {get("W_ir"), get("W_iz"), get("W_in"), get("W_hr"),
          get("W_hz"), get("W_hn"), get("b_r"),  get("b_z"),
          get("b_n"),  get("w_out"), get("b_out")};
}

NodeId dense_gru_input(Tape& tape, const Model& model,
                       const data::TimeSeriesSample& s, std::size_t t,
                       std::vector<double>& scratch) {
  if (model.kind == ModelKind::gru_forward) {
    return tape.constant(s.value_row(t));
  }
  const std::size_t D = s.features;
  scratch.resize(3 * D);
  const auto x = s.value_row(t);
  const auto e = s.elapsed_row(t);
  const auto m = s.mask_row(t);
  for (std::size_t d = 0; d < D; ++d) {
    scratch[d] = x[d];
    scratch[D + d] = e[d];
    scratch[2 * D + d] = m[d] ? 1.0 : 0.0;
  }
  return tape.constant(scratch);
}

// Runs the dense recurrence; calls on_step(h) after each valid step.
template <class OnStep>
NodeId dense_gru_run(Tape& tape, const Model& model, std::span<const NodeId> leaves,
                     const data::TimeSeriesSample& s, OnStep&& on_step) {
  const DenseGruLeaves p = dense_leaves(model, leaves);
  std::vector<double> scratch(model.hidden, 0.0);
  NodeId h = tape.constant(scratch);
  for (std::size_t t = 0; t < s.valid_len; ++t) {
    const NodeId in = dense_gru_input(tape, model, s, t, scratch);
    const NodeId r = tape.sigmoid(
        tape.add(tape.dense_affine(p.W_ir, in, p.b_r), tape.matvec(p.W_hr, h)));
    const NodeId z = tape.sigmoid(
        tape.add(tape.dense_affine(p.W_iz, in, p.b_z), tape.matvec(p.W_hz, h)));
    const NodeId n = tape.tanh(tape.add(tape.dense_affine(p.W_in, in, p.b_n),
                                        tape.matvec(p.W_hn, tape.hadamard(r, h))));
    h = tape.add(tape.hadamard(tape.one_minus(z), h), tape.hadamard(z, n));
    on_step(h, p);
  }
  return tape.dense_affine(p.w_out, h, p.b_out);
}

NodeId logistic_record(Tape& tape, const Model& model, std::span<const NodeId> leaves,
                       const data::TimeSeriesSample& s) {
  const auto summary_vec = summarize_features(s);
  const NodeId x = tape.constant(summary_vec);
  return tape.dense_affine(leaves[model.params.index_of("w")], x,
                           leaves[model.params.index_of("b")]);
}

}  // namespace

NodeId record_final_logit(Tape& tape, const Model& model,
                          std::span<const NodeId> leaves,
                          const data::TimeSeriesSample& sample) {
  require_valid(sample, model.features);
  if (leaves.size() != model.params.size()) {
    throw ContractError("leaf count does not match parameter count");
  }
  switch (model.kind) {
    case ModelKind::irnn: {
      const IrnnLeaves p = irnn_leaves(model, leaves);
      const std::vector<double> zeros(model.features, 0.0);
      NodeId h_hat = tape.constant(zeros);
      for (std::size_t t = 0; t < sample.valid_len; ++t) {
        const NodeId x = tape.constant(sample.value_row(t));
        const NodeId delta = tape.constant(sample.elapsed_row(t));
        const NodeId h = masked_gru_step(tape, p, x, h_hat);
        h_hat = decay_step(tape, p, model.irnn, x, h, delta).h_hat;
      }
      return additive_head(tape, p.w_out, p.b_out, h_hat).logit;
    }
    case ModelKind::gru_forward:
    case ModelKind::gru_simple:
      return dense_gru_run(tape, model, leaves, sample,
                           [](NodeId, const DenseGruLeaves&) {});
    case ModelKind::logistic:
      return logistic_record(tape, model, leaves, sample);
  }
  throw ContractError("unhandled model kind");
}

std::vector<double> forward_logits(const Model& model,
                                   const data::TimeSeriesSample& sample) {
  switch (model.kind) {
    case ModelKind::irnn:
      return irnn_forward(model, sample).logits;
    case ModelKind::gru_forward:
    case ModelKind::gru_simple: {
      require_valid(sample, model.features);
      Tape tape;
      const auto leaves = bind_parameters(tape, model);
      std::vector<double> logits;
      dense_gru_run(tape, model, leaves, sample,
                    [&](NodeId h, const DenseGruLeaves& p) {
                      logits.push_back(
                          tape.scalar(tape.dense_affine(p.w_out, h, p.b_out)));
                    });
      return logits;
    }
    case ModelKind::logistic: {
      Tape tape;
      return {predict_logit(model, sample, tape)};
    }
  }
  throw ContractError("unhandled model kind");
}

double predict_logit(const Model& model, const data::TimeSeriesSample& sample,
                     Tape& scratch) {
  scratch.clear();
  const auto leaves = bind_parameters(scratch, model);
  return scratch.scalar(record_final_logit(scratch, model, leaves, sample));
}

std::vector<double> predict_logits(const Model& model,
                                   const data::SampleRefs& samples) {
  Tape tape;
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto* s : samples) {
    out.push_back(predict_logit(model, *s, tape));
  }
  return out;
}

}  // namespace irnn::model
