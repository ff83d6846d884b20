#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lfsal/autodiff.hpp"
#include "lfsal/rng.hpp"
#include "lfsal/tensor.hpp"

namespace lfsal {

// Plain (non-differentiable) pixel-wise cross entropy for reporting:
// sum over pixels of -(y log p + (1-y) log(1-p)) with p clamped to
// [eps, 1-eps]. Accumulated in flat index order, matching the tape op.
double cross_entropy_sum(const Tensor& s, const Tensor& label, double eps = 1e-7);
double cross_entropy_mean(const Tensor& s, const Tensor& label, double eps = 1e-7);

// Empirical prediction/label co-occurrence over a batch. Classes are
// index 0 = salient (value above threshold) and index 1 = background.
struct CorrelationStats {
  std::array<std::array<double, 2>, 2> joint{};     // p(s = a, label = b)
  std::array<double, 2> marginal_pred{};            // p(s = a)
  std::array<double, 2> marginal_label{};           // p(label = b)
  std::array<std::array<double, 2>, 2> delta{};     // joint - marginal product
  std::array<std::array<double, 2>, 2> omega{};     // 1 where delta > 0
  std::int64_t pixels = 0;
};

// Estimates the joint/marginal frequencies over all pixels of the batch,
// binarizing both maps at `threshold` (strictly greater = salient), and
// derives delta and its sign matrix omega.
CorrelationStats estimate_delta(const std::vector<Tensor>& predictions,
                                const std::vector<Tensor>& labels,
                                double threshold = 0.5);

// Diagnostic scores for an anchor/cross pairing.
struct ScorePair {
  double s = 0.0;    // omega_anchor - omega_cross
  double psi = 0.0;  // omega_anchor - alpha * omega_cross
};
ScorePair score_functions(double omega_anchor, double omega_cross, double alpha);

// One mismatched sample pair: prediction of `pred` scored against the label
// of `label`, with pred != label and neither equal to the anchor.
struct CrossPair {
  int pred = 0;
  int label = 0;
};

// Draws pair_budget - 1 cross pairs from batch indices [0, batch_size),
// excluding `anchor`; within a pair the two indices are distinct. Uses a
// fixed number of generator draws per pair.
std::vector<CrossPair> draw_cross_pairs(int batch_size, int anchor, int pair_budget,
                                        Rng& rng);

// L_t = CE(anchor_pred, anchor_label)
//       - (alpha / n) * sum_n CE(cross_preds[n], cross_labels[n])
// built on `tape` so gradients flow into the anchor and every cross
// prediction. With alpha = 0 or no cross pairs this returns the anchor
// cross-entropy node itself (bit-identical reduction). The penalty terms are
// summed in ascending value order, so the result is invariant under
// permutation of the pairs.
Var penalty_loss(Tape& tape, Var anchor_pred, const Tensor& anchor_label,
                 const std::vector<Var>& cross_preds,
                 const std::vector<Tensor>& cross_labels, double alpha,
                 double eps = 1e-7);

}  // namespace lfsal
