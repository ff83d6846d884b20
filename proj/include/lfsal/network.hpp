#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "lfsal/autodiff.hpp"
#include "lfsal/params.hpp"
#include "lfsal/tensor.hpp"

namespace lfsal {

// How the pixel attention map is normalized: a softmax over the whole
// spatial extent (each map sums to 1), or an elementwise sigmoid.
enum class PixelAttentionMode { spatial_softmax, sigmoid };
const char* pixel_attention_name(PixelAttentionMode mode);
PixelAttentionMode pixel_attention_from_name(const std::string& name);

struct NetConfig {
  int k = 4;                              // focal slices per scene
  int levels = 4;                         // encoder stages (feature pyramid depth)
  std::vector<int> widths = {16, 32, 64, 64};  // channels per stage
  // Attention-guided slice weighting, recurrent slice refinement, and pixel
  // guidance of the all-focus stream. Off = slice features are averaged and
  // the all-focus features pass through untouched.
  bool mutual_fusion = true;
  PixelAttentionMode pixel_attention = PixelAttentionMode::spatial_softmax;
  int fuse_kernel = 3;                    // final fusion conv, odd

  void validate() const;
};

nlohmann::json net_config_to_json(const NetConfig& c);
NetConfig net_config_from_json(const nlohmann::json& j);

// ---- building blocks (all push onto the caller's tape) ----

// Weighted slice features f_i * att_i, where the k+1 attention weights are a
// softmax over per-group logits: each group's features are average-pooled to
// a vector and projected by a 1x1 conv. The k slice groups share one
// projection (so permuting slices permutes their weights identically); the
// all-focus group has its own and its weight (the last one) is discarded.
struct ChannelAttention {
  Var weights;                // (k+1,1,1), slices first, all-focus last
  std::vector<Var> weighted;  // k slice features scaled by their weight
};
ChannelAttention channel_attention(Tape& tape, Var allfocus,
                                   const std::vector<Var>& slices, Var w_slice,
                                   Var b_slice, Var w_af, Var b_af);

// Convolutional gated recurrence over a feature sequence; returns the final
// hidden state. gate_w is (4c,2c,kh,kw) producing the input/forget/output
// gates (sigmoid) and the candidate (tanh) from concat(x, h).
Var conv_lstm(Tape& tape, const std::vector<Var>& sequence, Var gate_w, Var gate_b);

// R' = R (x) Att + R with Att a one-channel map from a 1x1 conv of the
// refined slice features, normalized per `mode` and broadcast over channels.
Var pixel_guidance(Tape& tape, Var allfocus_feat, Var refined, Var w, Var b,
                   PixelAttentionMode mode);

// Collapses a feature pyramid (finest first) into a (1,out_h,out_w)
// prediction in (0,1): lateral 1x1 convs to a common width, bilinear resize
// to the finest grid, coarse-to-fine recurrence, 1x1 transition, sigmoid,
// resize to the output grid.
Var stream_head(Tape& tape, const std::vector<Var>& levels,
                const std::vector<Var>& lateral_w, const std::vector<Var>& lateral_b,
                Var cell_w, Var cell_b, Var trans_w, Var trans_b, int out_h,
                int out_w);

// ---- the full two-stream model ----

struct NetOutputs {
  Var s_f;  // focal-stack stream prediction, (1,h,w) in (0,1)
  Var s_r;  // all-focus stream prediction
  Var s_i;  // fused prediction (confidence-weighted when maps are given)
};

class Network {
 public:
  explicit Network(NetConfig cfg);
  const NetConfig& config() const { return cfg_; }

  // Fresh parameters, shapes fixed by the config, values uniform in
  // +-sqrt(1/fan_in), drawn in sorted name order from one seeded stream.
  ParameterSet init_params(std::uint64_t seed) const;

  // Stages every parameter as a tape leaf; gradients are read back per name.
  static std::map<std::string, Var> bind(Tape& tape, const ParameterSet& params);

  // Feature pyramid (finest first) for one (1,h,w) image. slice_stream
  // selects the weight-shared slice encoder instead of the all-focus one.
  // Dimensions must be divisible by 2^levels.
  std::vector<Var> encode(Tape& tape, const Tensor& image,
                          const std::map<std::string, Var>& pv,
                          bool slice_stream) const;

  // Runs the model. conf_f / conf_r are the per-pixel confidence maps for
  // the fusion stage (constants, no gradient); pass nullptr for all-ones
  // (evaluation, or training without the confidence mechanism).
  NetOutputs forward(Tape& tape, const Tensor& allfocus,
                     const std::vector<Tensor>& slices,
                     const std::map<std::string, Var>& pv,
                     const Tensor* conf_f = nullptr,
                     const Tensor* conf_r = nullptr) const;

 private:
  NetConfig cfg_;
};

}  // namespace lfsal
