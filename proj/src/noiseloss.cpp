#include "lfsal/noiseloss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lfsal {

double cross_entropy_sum(const Tensor& s, const Tensor& label, double eps) {
  require_same_shape(s, label, "cross_entropy");
  // Same compensated accumulation as the differentiable op, so values logged
  // through either path stay bit-identical.
  double total = 0.0, carry = 0.0;
  for (std::int64_t i = 0; i < s.size(); ++i) {
    const double p = std::clamp(s[i], eps, 1.0 - eps);
    const double term = -(label[i] * std::log(p) + (1.0 - label[i]) * std::log(1.0 - p));
    const double y = term - carry;
    const double t = total + y;
    carry = (t - total) - y;
    total = t;
  }
  return total;
}

double cross_entropy_mean(const Tensor& s, const Tensor& label, double eps) {
  return cross_entropy_sum(s, label, eps) / static_cast<double>(s.size());
}

CorrelationStats estimate_delta(const std::vector<Tensor>& predictions,
                                const std::vector<Tensor>& labels, double threshold) {
  if (predictions.empty()) {
    throw ConfigError("estimate_delta needs at least one sample");
  }
  if (predictions.size() != labels.size()) {
    throw ShapeError("estimate_delta: " + std::to_string(predictions.size()) +
                     " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  CorrelationStats stats;
  std::array<std::array<std::int64_t, 2>, 2> counts{};
  for (std::size_t n = 0; n < predictions.size(); ++n) {
    require_same_shape(predictions[n], labels[n], "estimate_delta");
    const Tensor& s = predictions[n];
    const Tensor& y = labels[n];
    for (std::int64_t i = 0; i < s.size(); ++i) {
      const int a = s[i] > threshold ? 0 : 1;
      const int b = y[i] > threshold ? 0 : 1;
      ++counts[a][b];
      ++stats.pixels;
    }
  }
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      stats.joint[a][b] =
          static_cast<double>(counts[a][b]) / static_cast<double>(stats.pixels);
    }
  }
  for (int a = 0; a < 2; ++a) {
    stats.marginal_pred[a] = stats.joint[a][0] + stats.joint[a][1];
    stats.marginal_label[a] = stats.joint[0][a] + stats.joint[1][a];
  }
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      stats.delta[a][b] =
          stats.joint[a][b] - stats.marginal_pred[a] * stats.marginal_label[b];
      stats.omega[a][b] = stats.delta[a][b] > 0.0 ? 1.0 : 0.0;
    }
  }
  return stats;
}

ScorePair score_functions(double omega_anchor, double omega_cross, double alpha) {
  return {omega_anchor - omega_cross, omega_anchor - alpha * omega_cross};
}

std::vector<CrossPair> draw_cross_pairs(int batch_size, int anchor, int pair_budget,
                                        Rng& rng) {
  if (pair_budget < 1) {
    throw ConfigError("pair budget must be >= 1, got " + std::to_string(pair_budget));
  }
  if (anchor < 0 || anchor >= batch_size) {
    throw ConfigError("anchor index " + std::to_string(anchor) +
                      " outside batch of size " + std::to_string(batch_size));
  }
  const int pairs = pair_budget - 1;
  if (pairs == 0) return {};
  if (batch_size < pair_budget || batch_size < 3) {
    throw ConfigError("cross pairs need at least " +
                      std::to_string(std::max(pair_budget, 3)) +
                      " samples in the batch, got " + std::to_string(batch_size));
  }
  std::vector<int> candidates;
  candidates.reserve(static_cast<std::size_t>(batch_size) - 1);
  for (int i = 0; i < batch_size; ++i) {
    if (i != anchor) candidates.push_back(i);
  }
  const int n = static_cast<int>(candidates.size());
  std::vector<CrossPair> out;
  out.reserve(static_cast<std::size_t>(pairs));
  for (int p = 0; p < pairs; ++p) {
    const int ia = static_cast<int>(rng.index(static_cast<std::uint64_t>(n)));
    int ib = static_cast<int>(rng.index(static_cast<std::uint64_t>(n - 1)));
    if (ib >= ia) ++ib;  // uniform over candidates distinct from ia
    out.push_back({candidates[static_cast<std::size_t>(ia)],
                   candidates[static_cast<std::size_t>(ib)]});
  }
  return out;
}

Var penalty_loss(Tape& tape, Var anchor_pred, const Tensor& anchor_label,
                 const std::vector<Var>& cross_preds,
                 const std::vector<Tensor>& cross_labels, double alpha, double eps) {
  if (cross_preds.size() != cross_labels.size()) {
    throw ShapeError("penalty_loss: " + std::to_string(cross_preds.size()) +
                     " cross predictions vs " + std::to_string(cross_labels.size()) +
                     " cross labels");
  }
  Var anchor_ce = tape.bce_sum(anchor_pred, anchor_label, eps);
  if (alpha == 0.0 || cross_preds.empty()) return anchor_ce;

  std::vector<Var> terms;
  terms.reserve(cross_preds.size());
  for (std::size_t n = 0; n < cross_preds.size(); ++n) {
    terms.push_back(tape.bce_sum(cross_preds[n], cross_labels[n], eps));
  }
  Var penalty = tape.sum_scalars_sorted(terms);
  const double weight = alpha / static_cast<double>(terms.size());
  return tape.sub(anchor_ce, tape.scale(penalty, weight));
}

}  // namespace lfsal
