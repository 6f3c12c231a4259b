// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "irnn/metrics.hpp"
#include "support.hpp"

using namespace irnn;
using namespace irnn::metrics;

namespace {

struct Instance {
  std::vector<double> s;
  std::vector<int> y;
};

Instance random_instance(std::mt19937_64& rng, std::size_t n, int levels = 0) {
  std::normal_distribution<double> z(0, 1);
  std::bernoulli_distribution b(0.3);
  Instance in;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = b(rng) ? 1 : 0;
    double s = z(rng) + 0.8 * y;
    if (levels > 0) s = std::round(s * levels) / levels;
    in.s.push_back(s);
    in.y.push_back(y);
  }
  in.y[0] = 1;
  in.y[1] = 0;
  return in;
}

}  // namespace

TEST_CASE("auc examples") {
  CHECK(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1}) == 0.75);
  CHECK(auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(auc(std::vector<double>{3, 3, 3, 3}, std::vector<int>{0, 1, 0, 1}) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), NumericError);
}

TEST_CASE("auc matches the pair-count oracle and both estimators agree") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 30; ++i) {
    const auto in = random_instance(rng, 20 + 17 * i, i % 3 == 0 ? 4 : 0);
    const double want = oracle::auc_pairs(in.s, in.y);
    CHECK(auc(in.s, in.y) == doctest::Approx(want).epsilon(1e-12));
    CHECK(auc_pairwise(in.s, in.y) == doctest::Approx(want).epsilon(1e-12));
    CHECK(auc_rank_sum(in.s, in.y) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("auc invariances") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    const auto in = random_instance(rng, 150);
    std::vector<double> t, neg;
    for (double v : in.s) {
      t.push_back(std::exp(2.0 * v) + 3.0);
      neg.push_back(-v);
    }
    CHECK(auc(t, in.y) == auc(in.s, in.y));
    CHECK(auc(in.s, in.y) + auc(neg, in.y) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("breakeven examples") {
  const auto a = breakeven(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0});
  CHECK(a.threshold > 0.2);
  CHECK(a.threshold < 0.8);
  CHECK(a.precision == 1.0);
  CHECK(a.recall == 1.0);
  CHECK(a.specificity == 1.0);

  const auto b = breakeven(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1});
  const auto o = oracle::breakeven_scan({0.9, 0.1}, {0, 1});
  CHECK(std::abs(b.precision - b.recall) == std::abs(o.precision - o.recall));
  CHECK(b.true_pos == o.tp);
  CHECK(b.false_pos == o.fp);
  CHECK_THROWS_AS(breakeven(std::vector<double>{1, 2}, std::vector<int>{0, 0}), NumericError);
}

TEST_CASE("breakeven matches an exhaustive scan") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 40; ++i) {
    const auto in = random_instance(rng, i == 0 ? 200 : 10 + 7 * i, i % 4 == 1 ? 3 : 0);
    const auto got = breakeven(in.s, in.y);
    const auto want = oracle::breakeven_scan(in.s, in.y);
    CHECK(got.true_pos == want.tp);
    CHECK(got.false_pos == want.fp);
    CHECK(got.true_neg == want.tn);
    CHECK(got.false_neg == want.fn);
    CHECK(got.precision == want.precision);
    CHECK(got.specificity == want.specificity);
    std::size_t above = 0;
    for (double s : in.s) above += s > got.threshold;
    CHECK(above == got.true_pos + got.false_pos);
  }
}

TEST_CASE("evaluate and report json") {
  const auto r = evaluate(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1});
  CHECK(r.auc == 0.75);
  CHECK(r.n_pos == 2);
  CHECK(r.n_neg == 2);
  const auto back = report_from_json(to_json(r));
  CHECK(back.auc == r.auc);
  CHECK(back.ppv == r.ppv);
  CHECK(back.breakeven_threshold == r.breakeven_threshold);
  CHECK(to_json(r).at("schema_version") == kReportSchemaVersion);
}

TEST_CASE("mean (std) formatting") {
  CHECK(format_mean_std(std::vector<double>{0.862}) == "0.862 (0.000)");
  CHECK(format_mean_std(std::vector<double>{0.859, 0.862, 0.865}) == "0.862 (0.003)");
  CHECK(format_mean_std(std::vector<double>{1.0, 2.0}, 2) == "1.50 (0.71)");
}

TEST_CASE("cross correlation") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0, 1);
  std::vector<nd::Tensor> hidden, feats;
  for (int i = 0; i < 5; ++i) {
    nd::Tensor f = nd::Tensor::zeros({6, 2});
    nd::Tensor h = nd::Tensor::zeros({6, 3});
    for (std::size_t t = 0; t < 6; ++t) {
      f.at(t, 0) = z(rng);
      f.at(t, 1) = z(rng);
      h.at(t, 0) = f.at(t, 0);
      h.at(t, 1) = 0.7;
      h.at(t, 2) = z(rng);
    }
    hidden.push_back(h);
    feats.push_back(f);
  }
  const auto c = cross_correlation(hidden, feats);
  CHECK(c.pooled_points == 30);
  CHECK(c.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.at(0, 1) == 0.0);
  CHECK(c.is_degenerate(0, 1));
  CHECK_FALSE(c.is_degenerate(0, 2));
  std::vector<double> f1, h2;
  for (int i = 0; i < 5; ++i) {
    for (std::size_t t = 0; t < 6; ++t) {
      f1.push_back(feats[i].at(t, 1));
      h2.push_back(hidden[i].at(t, 2));
    }
  }
  CHECK(c.at(1, 2) == doctest::Approx(oracle::pearson(f1, h2)).epsilon(1e-12));
  for (double v : c.values) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }

  std::swap(hidden[0], hidden[3]);
  std::swap(feats[0], feats[3]);
  const auto d = cross_correlation(hidden, feats);
  for (std::size_t k = 0; k < c.values.size(); ++k) {
    CHECK(d.values[k] == doctest::Approx(c.values[k]).epsilon(1e-12));
  }
  std::vector<nd::Tensor> one_h{nd::Tensor::zeros({1, 1})}, one_f{nd::Tensor::zeros({1, 1})};
  CHECK_THROWS_AS(cross_correlation(one_h, one_f), NumericError);
}

TEST_CASE("spearman and ranks") {
  CHECK(average_ranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
  CHECK(spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 8, 27, 64}) ==
        doctest::Approx(1.0));
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman(std::vector<double>{1, 2, 3}, std::vector<double>{5, 5, 5}) == 0.0);
  const std::vector<double> x{1, 2, 2, 4, 7}, y{3, 1, 4, 4, 9};
  CHECK(spearman(x, y) ==
        doctest::Approx(oracle::pearson(average_ranks(x), average_ranks(y))).epsilon(1e-14));
}
