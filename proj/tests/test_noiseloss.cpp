#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "doctest.h"
#include "lfsal/autodiff.hpp"
#include "lfsal/error.hpp"
#include "lfsal/gradcheck.hpp"
#include "lfsal/noiseloss.hpp"
#include "lfsal/rng.hpp"
#include "lfsal/tensor.hpp"

using lfsal::CrossPair;
using lfsal::cross_entropy_mean;
using lfsal::cross_entropy_sum;
using lfsal::draw_cross_pairs;
using lfsal::estimate_delta;
using lfsal::penalty_loss;
using lfsal::Rng;
using lfsal::score_functions;
using lfsal::Tape;
using lfsal::Tensor;
using lfsal::Var;

namespace {

Tensor random_map(Rng& rng, int h, int w, double lo = 0.0, double hi = 1.0) {
  Tensor t({h, w});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

Tensor random_binary(Rng& rng, int h, int w, double p = 0.5) {
  Tensor t({h, w});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.bernoulli(p) ? 1.0 : 0.0;
  return t;
}

}  // namespace

TEST_SUITE("noiseloss") {

TEST_CASE("cross entropy of a perfect prediction is clamping noise only") {
  Rng rng(61);
  const Tensor y = random_binary(rng, 8, 8);
  const double ce = cross_entropy_sum(y, y);
  CHECK(ce >= 0.0);
  CHECK(ce < 1e-5 * static_cast<double>(y.size()));
}

TEST_CASE("cross entropy single-pixel values match direct evaluation") {
  const Tensor one = Tensor::ones({1});
  const Tensor zero = Tensor::zeros({1});
  const Tensor half = Tensor::full({1}, 0.5);
  CHECK(cross_entropy_sum(half, one) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(cross_entropy_sum(half, zero) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  const Tensor p9 = Tensor::full({1}, 0.9);
  CHECK(cross_entropy_sum(p9, zero) ==
        doctest::Approx(2.302585092994046).epsilon(1e-9));
}

TEST_CASE("cross entropy mean is sum over pixel count") {
  Rng rng(62);
  const Tensor s = random_map(rng, 4, 6, 0.1, 0.9);
  const Tensor y = random_binary(rng, 4, 6);
  CHECK(cross_entropy_mean(s, y) == cross_entropy_sum(s, y) / 24.0);
  CHECK_THROWS_AS(cross_entropy_sum(s, Tensor::ones({2, 2})), lfsal::ShapeError);
}

TEST_CASE("cross entropy matches the differentiable tape op bit for bit") {
  Rng rng(63);
  const Tensor s = random_map(rng, 5, 5, 0.05, 0.95);
  const Tensor y = random_binary(rng, 5, 5);
  Tape tape;
  Var loss = tape.bce_sum(tape.leaf(s), y);
  CHECK(tape.value(loss)[0] == cross_entropy_sum(s, y));
}

TEST_CASE("perfectly correlated batch gives a diagonal-positive delta") {
  Rng rng(64);
  const Tensor y = random_binary(rng, 8, 8);
  REQUIRE(y.sum() > 0.0);
  REQUIRE(y.sum() < static_cast<double>(y.size()));
  const auto stats = estimate_delta({y}, {y});
  CHECK(stats.delta[0][0] > 0.0);
  CHECK(stats.delta[1][1] > 0.0);
  CHECK(stats.delta[0][1] < 0.0);
  CHECK(stats.delta[1][0] < 0.0);
  CHECK(stats.omega[0][0] == 1.0);
  CHECK(stats.omega[1][1] == 1.0);
  CHECK(stats.omega[0][1] == 0.0);
  CHECK(stats.omega[1][0] == 0.0);
  CHECK(stats.pixels == 64);
}

TEST_CASE("independent prediction and label drive delta toward zero") {
  Rng rng(65);
  // 10^5 pixels split over a few tensors; independent Bernoulli draws.
  std::vector<Tensor> preds, labels;
  for (int n = 0; n < 10; ++n) {
    preds.push_back(random_binary(rng, 100, 100, 0.5));
    labels.push_back(random_binary(rng, 100, 100, 0.3));
  }
  const auto stats = estimate_delta(preds, labels);
  CHECK(stats.pixels == 100000);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) CHECK(std::abs(stats.delta[a][b]) < 0.02);
  }
}

TEST_CASE("constant prediction degenerates delta to zero") {
  // Power-of-two pixel counts keep every frequency dyadic, so the algebraic
  // cancellation joint - marginal product is exact in floating point.
  Tensor y = Tensor::zeros({4, 4});
  for (int i = 0; i < 4; ++i) y[i] = 1.0;
  const auto stats = estimate_delta({Tensor::ones({4, 4})}, {y});
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      CHECK(stats.delta[a][b] == 0.0);
      CHECK(stats.omega[a][b] == 0.0);
    }
  }
}

TEST_CASE("delta rows and columns sum to zero; joint sums to one") {
  Rng rng(66);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor> preds, labels;
    const int count = 1 + static_cast<int>(rng.index(4));
    for (int n = 0; n < count; ++n) {
      preds.push_back(random_map(rng, 7, 9));
      labels.push_back(random_binary(rng, 7, 9, rng.uniform(0.1, 0.9)));
    }
    const auto stats = estimate_delta(preds, labels);
    double joint_total = 0.0;
    for (int a = 0; a < 2; ++a) {
      CHECK(std::abs(stats.delta[a][0] + stats.delta[a][1]) < 1e-9);
      CHECK(std::abs(stats.delta[0][a] + stats.delta[1][a]) < 1e-9);
      joint_total += stats.joint[a][0] + stats.joint[a][1];
    }
    CHECK(joint_total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("delta estimation rejects bad batches") {
  CHECK_THROWS_AS(estimate_delta({}, {}), lfsal::ConfigError);
  CHECK_THROWS_AS(estimate_delta({Tensor::ones({2, 2})}, {}), lfsal::ShapeError);
  CHECK_THROWS_AS(estimate_delta({Tensor::ones({2, 2})}, {Tensor::ones({3, 3})}),
                  lfsal::ShapeError);
}

TEST_CASE("score functions follow the two linear forms") {
  const auto both = score_functions(1.0, 1.0, 0.2);
  CHECK(both.s == 0.0);
  CHECK(both.psi == 0.8);
  const auto cross_zero = score_functions(1.0, 0.0, 0.2);
  CHECK(cross_zero.s == 1.0);
  CHECK(cross_zero.psi == 1.0);
  Rng rng(67);
  for (int trial = 0; trial < 10; ++trial) {
    const double oa = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const double oc = rng.bernoulli(0.5) ? 1.0 : 0.0;
    const auto unit = score_functions(oa, oc, 1.0);
    CHECK(unit.psi == unit.s);
  }
}

TEST_CASE("cross-pair draws are deterministic, valid, and exhaustive") {
  Rng a(71), b(71);
  const auto pa = draw_cross_pairs(8, 3, 4, a);
  const auto pb = draw_cross_pairs(8, 3, 4, b);
  REQUIRE(pa.size() == 3);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].pred == pb[i].pred);
    CHECK(pa[i].label == pb[i].label);
  }

  Rng rng(72);
  std::set<std::pair<int, int>> seen;
  for (int trial = 0; trial < 400; ++trial) {
    for (const auto& pair : draw_cross_pairs(5, 0, 4, rng)) {
      CHECK(pair.pred != pair.label);
      CHECK(pair.pred != 0);
      CHECK(pair.label != 0);
      CHECK(pair.pred >= 1);
      CHECK(pair.pred <= 4);
      CHECK(pair.label >= 1);
      CHECK(pair.label <= 4);
      seen.insert({pair.pred, pair.label});
    }
  }
  // All 4*3 ordered pairs over the non-anchor indices show up.
  CHECK(seen.size() == 12);
}

TEST_CASE("cross-pair draws reject undersized batches") {
  Rng rng(73);
  CHECK_THROWS_AS(draw_cross_pairs(3, 0, 4, rng), lfsal::ConfigError);
  CHECK_THROWS_AS(draw_cross_pairs(2, 0, 2, rng), lfsal::ConfigError);
  CHECK_THROWS_AS(draw_cross_pairs(4, 4, 4, rng), lfsal::ConfigError);
  CHECK_THROWS_AS(draw_cross_pairs(4, 0, 0, rng), lfsal::ConfigError);
  CHECK(draw_cross_pairs(1, 0, 1, rng).empty());  // no pairs requested
}

TEST_CASE("zero penalty coefficient reduces to the anchor cross entropy") {
  Rng rng(74);
  const Tensor s = random_map(rng, 4, 4, 0.1, 0.9);
  const Tensor y = random_binary(rng, 4, 4);
  const Tensor cs = random_map(rng, 4, 4, 0.1, 0.9);
  const Tensor cy = random_binary(rng, 4, 4);

  Tape tape;
  Var pred = tape.leaf(s);
  Var cross = tape.leaf(cs);
  Var with_zero_alpha = penalty_loss(tape, pred, y, {cross}, {cy}, 0.0);

  Tape plain;
  Var ce = plain.bce_sum(plain.leaf(s), y);
  CHECK(tape.value(with_zero_alpha)[0] == plain.value(ce)[0]);

  // No cross pairs behaves the same even with alpha > 0.
  Tape tape2;
  Var no_pairs = penalty_loss(tape2, tape2.leaf(s), y, {}, {}, 0.2);
  CHECK(tape2.value(no_pairs)[0] == plain.value(ce)[0]);
}

TEST_CASE("identical scenes collapse the loss to (1 - alpha) times ce") {
  Rng rng(75);
  const Tensor s = random_map(rng, 4, 4, 0.1, 0.9);
  const Tensor y = random_binary(rng, 4, 4);
  const double alpha = 0.2;

  Tape tape;
  Var anchor = tape.leaf(s);
  std::vector<Var> cross = {tape.leaf(s), tape.leaf(s), tape.leaf(s)};
  Var loss = penalty_loss(tape, anchor, y, cross, {y, y, y}, alpha);
  const double expect = (1.0 - alpha) * cross_entropy_sum(s, y);
  CHECK(tape.value(loss)[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("penalty loss matches a scalar recomputation of the formula") {
  Rng rng(76);
  const double alpha = 0.2;
  const Tensor ay = random_binary(rng, 4, 4);
  const Tensor as = random_map(rng, 4, 4, 0.05, 0.95);
  std::vector<Tensor> cs, cy;
  for (int n = 0; n < 3; ++n) {
    cs.push_back(random_map(rng, 4, 4, 0.05, 0.95));
    cy.push_back(random_binary(rng, 4, 4));
  }

  Tape tape;
  std::vector<Var> cross;
  for (const auto& t : cs) cross.push_back(tape.leaf(t));
  Var loss = penalty_loss(tape, tape.leaf(as), ay, cross, cy, alpha);

  double expect = cross_entropy_sum(as, ay);
  double penalty = 0.0;
  for (int n = 0; n < 3; ++n) penalty += cross_entropy_sum(cs[n], cy[n]);
  expect -= alpha / 3.0 * penalty;
  CHECK(std::abs(tape.value(loss)[0] - expect) <= 1e-10);
}

TEST_CASE("penalty loss is invariant under pair permutation") {
  Rng rng(77);
  const Tensor ay = random_binary(rng, 4, 4);
  const Tensor as = random_map(rng, 4, 4, 0.05, 0.95);
  std::vector<Tensor> cs, cy;
  for (int n = 0; n < 3; ++n) {
    cs.push_back(random_map(rng, 4, 4, 0.05, 0.95));
    cy.push_back(random_binary(rng, 4, 4));
  }
  auto eval_order = [&](std::vector<int> order) {
    Tape tape;
    std::vector<Var> cross;
    std::vector<Tensor> labels;
    for (int idx : order) {
      cross.push_back(tape.leaf(cs[static_cast<std::size_t>(idx)]));
      labels.push_back(cy[static_cast<std::size_t>(idx)]);
    }
    Var loss = penalty_loss(tape, tape.leaf(as), ay, cross, labels, 0.2);
    return tape.value(loss)[0];
  };
  const double base = eval_order({0, 1, 2});
  CHECK(eval_order({2, 0, 1}) == base);
  CHECK(eval_order({1, 2, 0}) == base);
  CHECK(eval_order({2, 1, 0}) == base);
}

TEST_CASE("loss is strictly decreasing in each mismatched ce term") {
  // The penalty enters with a minus sign, so pushing a cross prediction
  // toward its mismatched label (raising agreement, lowering that pair's
  // cross entropy) strictly raises the total loss: agreeing with labels
  // drawn from other scenes is what gets punished.
  Rng rng(78);
  const Tensor ay = random_binary(rng, 4, 4);
  const Tensor as = random_map(rng, 4, 4, 0.2, 0.8);
  const Tensor cy = random_binary(rng, 4, 4);
  const Tensor far = random_map(rng, 4, 4, 0.2, 0.8);

  auto eval_with_cross = [&](const Tensor& cross_pred) {
    Tape tape;
    Var loss =
        penalty_loss(tape, tape.leaf(as), ay, {tape.leaf(cross_pred)}, {cy}, 0.2);
    return tape.value(loss)[0];
  };

  double prev_loss = eval_with_cross(far);
  double prev_ce = cross_entropy_sum(far, cy);
  for (double t : {0.25, 0.5, 0.75, 1.0}) {
    Tensor stepped(far.shape());
    for (std::int64_t i = 0; i < far.size(); ++i) {
      const double target = std::clamp(cy[i], 0.05, 0.95);
      stepped[i] = far[i] + t * (target - far[i]);
    }
    const double ce = cross_entropy_sum(stepped, cy);
    const double loss = eval_with_cross(stepped);
    CHECK(ce < prev_ce);      // agreement went up
    CHECK(loss > prev_loss);  // so the loss went up with it
    prev_ce = ce;
    prev_loss = loss;
  }
}

TEST_CASE("gradients flow through anchor and cross predictions") {
  Rng rng(79);
  const Tensor ay = random_binary(rng, 3, 3);
  const Tensor as = random_map(rng, 3, 3, 0.2, 0.8);
  std::vector<Tensor> cs = {random_map(rng, 3, 3, 0.2, 0.8),
                            random_map(rng, 3, 3, 0.2, 0.8)};
  std::vector<Tensor> cy = {random_binary(rng, 3, 3), random_binary(rng, 3, 3)};

  lfsal::GradFn fn = [&](const std::vector<Tensor>& in) {
    Tape tape;
    Var anchor = tape.leaf(in[0]);
    std::vector<Var> cross = {tape.leaf(in[1]), tape.leaf(in[2])};
    Var loss = penalty_loss(tape, anchor, ay, cross, cy, 0.2);
    tape.backward(loss);
    return lfsal::GradResult{
        tape.value(loss)[0],
        {tape.grad(anchor), tape.grad(cross[0]), tape.grad(cross[1])}};
  };
  const auto rep = lfsal::grad_check(fn, {as, cs[0], cs[1]});
  INFO(rep.describe());
  CHECK(rep.passed);

  // The cross gradient is exactly -(alpha/n) times the plain ce gradient.
  Tape tape;
  Var anchor = tape.leaf(as);
  std::vector<Var> cross = {tape.leaf(cs[0]), tape.leaf(cs[1])};
  Var loss = penalty_loss(tape, anchor, ay, cross, cy, 0.2);
  tape.backward(loss);
  Tape solo;
  Var solo_pred = solo.leaf(cs[0]);
  Var ce = solo.bce_sum(solo_pred, cy[0]);
  solo.backward(ce);
  const Tensor& got = tape.grad(cross[0]);
  const Tensor& raw = solo.grad(solo_pred);
  for (std::int64_t i = 0; i < got.size(); ++i) {
    CHECK(got[i] == doctest::Approx(-0.1 * raw[i]).epsilon(1e-12));
  }
}

TEST_CASE("mismatched cross inputs are rejected") {
  Tape tape;
  Var s = tape.leaf(Tensor::full({2, 2}, 0.5));
  CHECK_THROWS_AS(
      penalty_loss(tape, s, Tensor::ones({2, 2}), {s}, {}, 0.2),
      lfsal::ShapeError);
}

}  // TEST_SUITE
