// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "irnn/errors.hpp"
#include "irnn/ndcore.hpp"

using namespace irnn;
using nd::NodeId;
using nd::Tape;
using nd::Tensor;

namespace {

std::vector<double> values(const Tape& tape, NodeId id) {
  const auto v = tape.value(id);
  return {v.begin(), v.end()};
}

void check_close(const std::vector<double>& got, const std::vector<double>& want,
                 double tol = 1e-15) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(tol));
  }
}

Tensor random_tensor(std::mt19937_64& rng, std::vector<std::size_t> shape, double a = 2.0) {
  std::uniform_real_distribution<double> u(-a, a);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = u(rng);
  return t;
}

}  // namespace

TEST_CASE("diag_affine examples") {
  Tape tape;
  auto run = [&](std::vector<double> w, std::vector<double> x, std::vector<double> b) {
    tape.clear();
    return values(tape, tape.diag_affine(tape.constant(w), tape.constant(x), tape.constant(b)));
  };
  check_close(run({1, 1}, {0, 0}, {0.5, -0.5}), {0.5, -0.5});
  check_close(run({2, 3}, {1, -1}, {0, 0}), {2, -3});
  check_close(run({0.1, 0.2, 0.3}, {1, 2, 3}, {1, 1, 1}), {1.1, 1.4, 1.9}, 1e-14);
  CHECK_THROWS_AS(run({1, 2}, {1}, {0, 0}), DimensionError);
}

TEST_CASE("dense_affine examples") {
  Tape tape;
  auto run = [&](Tensor W, std::vector<double> x, std::vector<double> b) {
    tape.clear();
    return values(tape, tape.dense_affine(tape.constant(W), tape.constant(x), tape.constant(b)));
  };
  check_close(run(Tensor::matrix(2, 2, {1, 0, 0, 1}), {3, 4}, {0, 0}), {3, 4});
  check_close(run(Tensor::matrix(1, 2, {1, 1}), {2, 5}, {1}), {8});
  check_close(run(Tensor::matrix(2, 2, {1, 2, 3, 4}), {1, 1}, {0, 0}), {3, 7});
  CHECK_THROWS_AS(run(Tensor::matrix(2, 2, {1, 2, 3, 4}), {1, 1, 1}, {0, 0}), DimensionError);
  CHECK_THROWS_AS(run(Tensor::matrix(2, 2, {1, 2, 3, 4}), {1, 1}, {0}), DimensionError);
}

TEST_CASE("diag_affine equals dense_affine with a diagonal matrix") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t D = 1 + trial % 4;
    const Tensor w = random_tensor(rng, {D});
    const Tensor x = random_tensor(rng, {D});
    const Tensor b = random_tensor(rng, {D});
    Tensor W = Tensor::zeros({D, D});
    for (std::size_t d = 0; d < D; ++d) W.at(d, d) = w.data[d];
    Tape tape;
    const auto a = values(tape, tape.diag_affine(tape.constant(w), tape.constant(x), tape.constant(b)));
    const auto c = values(tape, tape.dense_affine(tape.constant(W), tape.constant(x), tape.constant(b)));
    CHECK(a == c);
  }
}

TEST_CASE("elementwise examples") {
  Tape tape;
  check_close(values(tape, tape.sigmoid(tape.constant(std::vector<double>{0.0}))), {0.5});
  check_close(values(tape, tape.max0(tape.constant(std::vector<double>{-1.0, 2.0}))), {0, 2});
  check_close(values(tape, tape.exp_neg(tape.constant(std::vector<double>{0.0, std::log(2.0)}))),
              {1.0, 0.5});
  check_close(values(tape, tape.one_minus(tape.constant(std::vector<double>{0.25}))), {0.75});
  const NodeId a = tape.constant(std::vector<double>{1, 2});
  const NodeId b = tape.constant(std::vector<double>{3, 5});
  check_close(values(tape, tape.hadamard(a, b)), {3, 10});
  check_close(values(tape, tape.add(a, b)), {4, 7});
  check_close(values(tape, tape.sub(a, b)), {-2, -3});
  CHECK_THROWS_AS(tape.add(a, tape.constant(std::vector<double>{1})), DimensionError);
}

TEST_CASE("backward examples") {
  nd::ParamSet ps;
  ps.add("w", Tensor::vector({2.0}));
  Tape tape;
  const NodeId w = tape.parameter(0, ps.at(0));
  const NodeId f = tape.hadamard(w, tape.constant(std::vector<double>{3.0}));
  const auto g = tape.backward(f, ps);
  CHECK(g[0].data[0] == 3.0);

  nd::ParamSet q;
  q.add("p", Tensor::vector({0.0}));
  tape.clear();
  const NodeId s = tape.sigmoid(tape.parameter(0, q.at(0)));
  CHECK(tape.backward(s, q)[0].data[0] == 0.25);
}

TEST_CASE("backward rejects non-scalar outputs") {
  nd::ParamSet ps;
  ps.add("w", Tensor::vector({1.0, 2.0}));
  Tape tape;
  const NodeId w = tape.parameter(0, ps.at(0));
  CHECK_THROWS_AS(tape.backward(w, ps), ContractError);
}

TEST_CASE("constants receive no gradient") {
  nd::ParamSet ps;
  ps.add("w", Tensor::vector({1.5, -0.5}));
  Tape tape;
  const NodeId c = tape.constant(std::vector<double>{4.0, 1.0});
  const NodeId w = tape.parameter(0, ps.at(0));
  const auto g = tape.backward(tape.sum(tape.hadamard(w, c)), ps);
  CHECK(g.size() == 1);
  CHECK(g[0].data == std::vector<double>{4.0, 1.0});
}

TEST_CASE("gradcheck on a quadratic") {
  nd::ParamSet ps;
  ps.add("p", Tensor::vector({3.0}));
  const auto r = nd::gradcheck(
      [](Tape& t, std::span<const NodeId> p) { return t.hadamard(p[0], p[0]); }, ps, 1e-4);
  CHECK(r.max_relative_error < 1e-9);
  CHECK_THROWS_AS(nd::gradcheck([](Tape& t, std::span<const NodeId> p) { return p[0]; }, ps, 0.0),
                  ContractError);
}

TEST_CASE("gradcheck flags non-finite values") {
  nd::ParamSet ps;
  ps.add("p", Tensor::vector({800.0}));
  CHECK_THROWS_AS(nd::gradcheck([](Tape& t, std::span<const NodeId> p) {
                    return t.sum(t.exp_neg(t.scale(p[0], -1.0)));
                  }, ps, 1e-4),
                  NumericError);
}

TEST_CASE("every op kind passes a finite-difference check") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t D = 3;
    nd::ParamSet ps;
    ps.add("w", random_tensor(rng, {D}));
    ps.add("b", random_tensor(rng, {D}));
    ps.add("W", random_tensor(rng, {D, D}));
    ps.add("v", random_tensor(rng, {D}));
    // Shift the rectifier input away from its kink.
    for (double& v : ps.at(3).data) v = v >= 0 ? v + 0.2 : v - 0.2;
    const Tensor x = random_tensor(rng, {D});
    const double label = trial % 2;
    auto f = [&](Tape& t, std::span<const NodeId> p) {
      NodeId h = t.constant(x);
      for (int step = 0; step < 5; ++step) {
        const NodeId a = t.diag_affine(p[0], h, p[1]);
        const NodeId d = t.dense_affine(p[2], a, p[1]);
        const NodeId s = t.sigmoid(d);
        const NodeId g = t.tanh(t.matvec(p[2], h));
        const NodeId e = t.exp_neg(t.max0(p[3]));
        h = t.add(t.hadamard(t.one_minus(s), g), t.sub(e, t.scale(s, 0.3)));
      }
      return t.bce_with_logits(t.sum(h), label);
    };
    const auto r = nd::gradcheck(f, ps, 1e-4);
    INFO("trial " << trial << " param " << r.worst_param << " entry " << r.worst_entry);
    CHECK(r.max_relative_error < 1e-5);
  }
}

TEST_CASE("backward is linear in the output") {
  std::mt19937_64 rng(3);
  nd::ParamSet ps;
  ps.add("w", random_tensor(rng, {3}));
  auto g1 = [&](Tape& t, NodeId w) { return t.sum(t.tanh(w)); };
  auto g2 = [&](Tape& t, NodeId w) { return t.sum(t.hadamard(w, w)); };
  Tape tape;
  NodeId w = tape.parameter(0, ps.at(0));
  const auto both = tape.backward(tape.add(g1(tape, w), g2(tape, w)), ps);
  tape.clear();
  w = tape.parameter(0, ps.at(0));
  const auto a = tape.backward(g1(tape, w), ps);
  tape.clear();
  w = tape.parameter(0, ps.at(0));
  const auto b = tape.backward(g2(tape, w), ps);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(both[0].data[i] == doctest::Approx(a[0].data[i] + b[0].data[i]).epsilon(1e-14));
  }
}

TEST_CASE("tape evaluation is deterministic") {
  std::mt19937_64 rng(9);
  nd::ParamSet ps;
  ps.add("W", random_tensor(rng, {4, 4}));
  const Tensor x = random_tensor(rng, {4});
  auto run = [&] {
    Tape t;
    const NodeId W = t.parameter(0, ps.at(0));
    const NodeId out = t.sum(t.sigmoid(t.matvec(W, t.constant(x))));
    return std::make_pair(t.scalar(out), t.backward(out, ps)[0].data);
  };
  CHECK(run() == run());
}

TEST_CASE("bce_with_logits matches the stable closed form") {
  Tape tape;
  for (double z : {-30.0, -1.0, 0.0, 2.5, 100.0}) {
    for (double y : {0.0, 1.0}) {
      tape.clear();
      const double got = tape.scalar(tape.bce_with_logits(tape.constant(std::vector<double>{z}), y));
      const double want = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      CHECK(got == doctest::Approx(want).epsilon(1e-15));
    }
  }
}

TEST_CASE("tensor shape invariants") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0}), DimensionError);
  CHECK(Tensor::zeros({3, 2}).size() == 6);
  CHECK(nd::shape_product({2, 3, 4}) == 24);
  nd::ParamSet ps;
  ps.add("a", Tensor::vector({1, 2}));
  CHECK_THROWS(ps.add("a", Tensor::vector({1})));
  CHECK_THROWS(ps["missing"]);
}
