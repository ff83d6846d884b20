#pragma once

#include <functional>
#include <vector>

#include "lfsal/tensor.hpp"

namespace lfsal {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Reverse-mode tape. Operations record their inputs and a backward closure;
// backward() replays them in exact reverse order. Graphs are deterministic:
// rebuilding the same graph yields bit-identical values and gradients.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  // Multiply by a fixed tensor; no gradient flows into the factor.
  Var mul_const(Var a, Tensor factor);
  // Multiply (C,H,W) by a size-1 scalar variable.
  Var scale_by(Var a, Var s);
  // Multiply (C,H,W) by a (1,H,W) map broadcast over channels.
  Var mul_channel_bcast(Var a, Var map);

  Var relu(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var softmax(Var a, int axis);

  // input (Cin,H,W), weights (Cout,Cin,kh,kw), bias (Cout)
  Var conv2d(Var input, Var weights, Var bias, int stride = 1, int pad = 0);

  Var concat_channels(const std::vector<Var>& xs);
  Var slice_channels(Var a, int c0, int c1);
  Var global_avg_pool(Var a);
  // Corner-aligned bilinear resize of (C,H,W) to (C,oh,ow).
  Var upsample_bilinear(Var a, int oh, int ow);
  Var reshape(Var a, std::vector<int> shape);

  Var sum(Var a);
  // Scalars summed in ascending value order: permutation invariant.
  Var sum_scalars_sorted(const std::vector<Var>& xs);
  // Binary cross entropy summed over elements, probabilities clamped to
  // [eps, 1-eps]. Target is a constant.
  Var bce_sum(Var pred, Tensor target, double eps = 1e-7);

  // Reverse sweep from a scalar root. May be called once per tape.
  void backward(Var root);

  const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  // Zero tensor if no gradient reached the node.
  const Tensor& grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool touched = false;
    std::function<void(Tape&, int)> back;  // empty for leaves
  };

  Var push(Tensor value, std::function<void(Tape&, int)> back);
  Tensor& grad_buf(int id);
  void check(Var v) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace lfsal
