#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lfsal/tensor.hpp"

namespace lfsal {

// A differentiable scalar function of several tensor inputs. Returns the value
// and the gradient with respect to every input (same order, same shapes).
struct GradResult {
  double value = 0.0;
  std::vector<Tensor> grads;
};
using GradFn = std::function<GradResult(const std::vector<Tensor>&)>;

// How subsampled probe coordinates are chosen. `largest` takes each input's
// top coordinates by analytic gradient magnitude: those dominate an optimizer
// step, and central differences resolve them reliably, whereas coordinates
// many decades below the loss scale drown in f64 rounding noise regardless of
// step size.
enum class CoordPolicy { random, largest };

struct GradCheckOptions {
  double step = 1e-5;        // central-difference step
  double tolerance = 1e-4;   // max allowed relative error
  int max_coords = 0;        // 0 = check every coordinate, else subsample
  std::uint64_t seed = 0;    // subsampling seed (random policy)
  CoordPolicy policy = CoordPolicy::random;
};

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  int worst_input = -1;           // index into the input list
  std::int64_t worst_coord = -1;  // flat index within that input
  double analytic = 0.0;          // gradient entries at the worst coordinate
  double numeric = 0.0;
  std::string note;  // set when the check aborts (e.g. non-finite gradient)

  std::string describe() const;
};

// Compares the analytic gradient of `fn` against central finite differences
// evaluated on perturbed copies of `inputs`. Relative error of a pair (a, n)
// is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const GradFn& fn, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& opts = {});

}  // namespace lfsal
