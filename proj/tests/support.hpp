// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations and random fixtures for tests.
// Nothing here goes through the tape.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "irnn/datapipe.hpp"
#include "irnn/model.hpp"
#include "irnn/ndcore.hpp"

namespace oracle {

inline double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// ------------------------------------------------------------- fixtures

/// Random sample with consistent mask/elapsed: an observed cell has
/// elapsed 0, otherwise elapsed grows and caps at 1.
inline irnn::data::TimeSeriesSample random_sample(std::mt19937_64& rng, std::size_t D,
                                                  std::size_t T, int label = 0) {
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  std::uniform_real_distribution<double> gap(0.05, 0.6);
  std::bernoulli_distribution obs(0.5);
  irnn::data::TimeSeriesSample s;
  s.sample_id = "r";
  s.label = label;
  s.features = D;
  s.max_len = T + 2;
  s.valid_len = T;
  s.values.assign(T * D, 0.0);
  s.elapsed.assign(T * D, 1.0);
  s.mask.assign(T * D, 0);
  double t_now = 0.0;
  std::vector<double> last(D, 0.0);
  std::vector<double> since(D, -1.0);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0) t_now += gap(rng);
    s.times.push_back(t_now);
    for (std::size_t d = 0; d < D; ++d) {
      const std::size_t k = t * D + d;
      if (obs(rng) || (t == 0 && d == 0)) {
        last[d] = val(rng);
        since[d] = t_now;
        s.mask[k] = 1;
        s.elapsed[k] = 0.0;
      } else if (since[d] >= 0.0) {
        s.elapsed[k] = std::min(1.0, 0.01 + (t_now - since[d]) / 2.0);
      }
      s.values[k] = last[d];
    }
  }
  return s;
}

/// Randomizes every parameter entry uniformly in [-a, a].
inline void randomize(irnn::model::Model& m, std::mt19937_64& rng, double a = 1.0) {
  std::uniform_real_distribution<double> u(-a, a);
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    for (double& v : m.params.at(i).data) v = u(rng);
  }
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("irnn_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// ------------------------------------------------------- I-RNN reference

struct IrnnSteps {
  std::vector<std::vector<double>> h, h_hat, mu, gamma, contrib;
  std::vector<double> logit;
};

/// Straight-line evaluation of the masked GRU, decay and additive head.
inline IrnnSteps irnn_reference(const irnn::model::Model& m,
                                const irnn::data::TimeSeriesSample& s) {
  const std::size_t D = m.features;
  auto P = [&](const char* n) -> const std::vector<double>& { return m.params[n].data; };
  const auto& w_ir = P("w_ir");
  const auto& w_iz = P("w_iz");
  const auto& w_in = P("w_in");
  const auto& w_hr = P("w_hr");
  const auto& w_hz = P("w_hz");
  const auto& w_hn = P("w_hn");
  const auto& b_r = P("b_r");
  const auto& b_z = P("b_z");
  const auto& b_n = P("b_n");
  const auto& w_g = P("gamma_weight");
  const auto& b_g = P("b_gamma");
  const auto& w_o = P("w_out");
  const double b_o = P("b_out")[0];
  const bool dyn = !m.irnn.mu_static;

  IrnnSteps out;
  std::vector<double> prev(D, 0.0);
  for (std::size_t t = 0; t < s.valid_len; ++t) {
    std::vector<double> h(D), hh(D), mu(D), g(D), c(D);
    double y = b_o;
    for (std::size_t d = 0; d < D; ++d) {
      const double x = s.values[t * D + d];
      const double r = sig(w_ir[d] * x + w_hr[d] * prev[d] + b_r[d]);
      const double z = sig(w_iz[d] * x + w_hz[d] * prev[d] + b_z[d]);
      const double n = std::tanh(w_in[d] * x + w_hn[d] * (r * prev[d]) + b_n[d]);
      h[d] = (1.0 - z) * prev[d] + z * n;
    }
    for (std::size_t d = 0; d < D; ++d) {
      double m_d = 0.0;
      if (dyn) {
        const auto& W = P("mu_weight");
        m_d = P("b_mu")[d];
        if (m.irnn.mu_diagonal) {
          m_d += W[d] * s.values[t * D + d];
        } else {
          for (std::size_t k = 0; k < D; ++k) m_d += W[d * D + k] * s.values[t * D + k];
        }
      }
      double pre = b_g[d];
      if (m.irnn.gamma_diagonal) {
        pre += w_g[d] * s.elapsed[t * D + d];
      } else {
        for (std::size_t k = 0; k < D; ++k) pre += w_g[d * D + k] * s.elapsed[t * D + k];
      }
      g[d] = pre > 0.0 ? pre : 0.0;
      mu[d] = m_d;
      hh[d] = m_d + (h[d] - m_d) * std::exp(-g[d]);
      c[d] = w_o[d] * hh[d];
      y += c[d];
    }
    out.h.push_back(h);
    out.h_hat.push_back(hh);
    out.mu.push_back(mu);
    out.gamma.push_back(g);
    out.contrib.push_back(c);
    out.logit.push_back(y);
    prev = hh;
  }
  return out;
}

// -------------------------------------------------- dense GRU reference

inline std::vector<double> dense_gru_reference(const irnn::model::Model& m,
                                               const irnn::data::TimeSeriesSample& s) {
  const std::size_t D = m.features;
  const std::size_t H = m.hidden;
  const bool simple = m.kind == irnn::model::ModelKind::gru_simple;
  const std::size_t in = simple ? 3 * D : D;
  auto P = [&](const char* n) -> const std::vector<double>& { return m.params[n].data; };
  std::vector<double> h(H, 0.0);
  std::vector<double> logits;
  for (std::size_t t = 0; t < s.valid_len; ++t) {
    std::vector<double> x(in);
    for (std::size_t d = 0; d < D; ++d) {
      x[d] = s.values[t * D + d];
      if (simple) {
        x[D + d] = s.elapsed[t * D + d];
        x[2 * D + d] = s.mask[t * D + d];
      }
    }
    auto lin = [&](const char* W, const char* b, const std::vector<double>& v, std::size_t j) {
      double acc = b ? P(b)[j] : 0.0;
      for (std::size_t k = 0; k < v.size(); ++k) acc += P(W)[j * v.size() + k] * v[k];
      return acc;
    };
    std::vector<double> r(H), z(H), rh(H), next(H);
    for (std::size_t j = 0; j < H; ++j) {
      r[j] = sig(lin("W_ir", "b_r", x, j) + lin("W_hr", nullptr, h, j));
      z[j] = sig(lin("W_iz", "b_z", x, j) + lin("W_hz", nullptr, h, j));
    }
    for (std::size_t j = 0; j < H; ++j) rh[j] = r[j] * h[j];
    for (std::size_t j = 0; j < H; ++j) {
      const double n = std::tanh(lin("W_in", "b_n", x, j) + lin("W_hn", nullptr, rh, j));
      next[j] = (1.0 - z[j]) * h[j] + z[j] * n;
    }
    h = next;
    double y = P("b_out")[0];
    for (std::size_t j = 0; j < H; ++j) y += P("w_out")[j] * h[j];
    logits.push_back(y);
  }
  return logits;
}

// ------------------------------------------------------------- metrics

/// P(pos > neg) + 0.5 P(tie) by counting every pair.
inline double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] == 1 && y[j] == 0) {
        den += 1.0;
        if (s[i] > s[j]) num += 1.0;
        if (s[i] == s[j]) num += 0.5;
      }
    }
  }
  return num / den;
}

struct Scan {
  std::size_t tp, fp, tn, fn;
  double precision, recall, specificity;
};

/// Tries "score > c" for c = -inf and every distinct score, keeping the
/// smallest |precision - recall|, then higher specificity, then higher recall.
inline Scan breakeven_scan(const std::vector<double>& s, const std::vector<int>& y) {
  std::vector<double> cands = s;
  cands.push_back(-std::numeric_limits<double>::infinity());
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  bool have = false;
  Scan best{};
  for (double c : cands) {
    Scan r{};
    r.tp = r.fp = r.tn = r.fn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool p = s[i] > c;
      if (p && y[i] == 1) ++r.tp;
      if (p && y[i] == 0) ++r.fp;
      if (!p && y[i] == 0) ++r.tn;
      if (!p && y[i] == 1) ++r.fn;
    }
    r.precision = r.tp + r.fp == 0 ? 1.0 : double(r.tp) / double(r.tp + r.fp);
    r.recall = double(r.tp) / double(r.tp + r.fn);
    r.specificity = double(r.tn) / double(r.tn + r.fp);
    const double g = std::abs(r.precision - r.recall);
    const double bg = std::abs(best.precision - best.recall);
    if (!have || g < bg ||
        (g == bg && (r.specificity > best.specificity ||
                     (r.specificity == best.specificity && r.recall > best.recall)))) {
      best = r;
      have = true;
    }
  }
  return best;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Freshly initialized model and random sample; returns the worst relative error.
inline double gradcheck_instance(irnn::model::ModelKind kind, std::mt19937_64& rng,
                                 std::size_t D = 3, std::size_t T = 5, double step = 1e-4) {
  const irnn::model::Model m = irnn::model::make_model(kind, D, rng());
  const auto s = random_sample(rng, D, T, static_cast<int>(rng() % 2));
  const auto r = irnn::nd::gradcheck(
      [&](irnn::nd::Tape& t, std::span<const irnn::nd::NodeId> p) {
        return t.bce_with_logits(irnn::model::record_final_logit(t, m, p, s), s.label);
      },
      m.params, step);
  return r.max_relative_error;
}

}  // namespace oracle
