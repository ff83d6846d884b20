#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lfsal/autodiff.hpp"
#include "lfsal/tensor.hpp"

namespace lfsal {

struct ForgettingConfig {
  double delta = 0.3;  // margin for the prediction/label agreement test
  double a = 0.04;     // descent coefficient of the confidence weights

  void validate() const;  // delta in (0,1), a > 0
};

// T(u,v) = 1 iff |s(u,v) - label(u,v)| <= delta, else 0.
Tensor transform_matrix(const Tensor& s, const Tensor& label, double delta);

// M(u,v) = 2 / (1 + exp(a * G(u,v)^2)): 1 exactly at G = 0, strictly
// decreasing, saturating to 0 without overflow for large counts.
Tensor confidence_weight(const Tensor& counts, double a);

// Per-sample bookkeeping for the two prediction streams (f = focal-stack
// stream, r = all-focus stream).
struct SampleForgetting {
  Tensor t_f, t_r;  // last-iteration transformation matrices, binary
  Tensor g_f, g_r;  // cumulative forgetting counts, non-decreasing
  // First epoch at which T reached 1 per pixel; -1 while never learned.
  Tensor first_learn_f, first_learn_r;
  int last_epoch = -1;
};

// Tracks forgetting events across epochs, keyed by sample id. The first
// presentation seeds T without firing events; each later update increments G
// exactly where T transitions 1 -> 0.
class ForgettingState {
 public:
  ForgettingState() = default;
  explicit ForgettingState(ForgettingConfig cfg);

  const ForgettingConfig& config() const { return cfg_; }
  bool contains(const std::string& id) const { return state_.count(id) != 0; }
  std::size_t size() const { return state_.size(); }
  std::vector<std::string> ids() const;  // sorted

  // One call per sample per epoch, with that epoch's stream predictions.
  void update(const std::string& id, const Tensor& s_f, const Tensor& s_r,
              const Tensor& label, int epoch);

  const SampleForgetting& at(const std::string& id) const;  // StateError if unknown

  // Confidence maps recomputed from the counts at each use.
  Tensor weight_f(const std::string& id) const;
  Tensor weight_r(const std::string& id) const;

  void save(std::ostream& out) const;
  static ForgettingState load(std::istream& in);

 private:
  ForgettingConfig cfg_;
  std::map<std::string, SampleForgetting> state_;  // ordered: deterministic io
};

// Differentiable fusion of the two initial predictions under their confidence
// maps: sigmoid(conv(C[m_f (x) s_f; m_r (x) s_r]) + bias), bilinearly resized
// to (out_h, out_w) when needed. The confidence maps enter as constants, so
// no gradient flows through the counting process. Inputs s_f, s_r are
// (1,h,w); weights (1,2,kh,kw) with odd kernel; bias (1).
Var guided_fuse(Tape& tape, Var s_f, Var s_r, const Tensor& m_f, const Tensor& m_r,
                Var weights, Var bias, int out_h, int out_w);

}  // namespace lfsal
