#include "lfsal/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lfsal/rng.hpp"

namespace lfsal {

std::string GradCheckReport::describe() const {
  std::ostringstream os;
  os << (passed ? "PASS" : "FAIL");
  if (!note.empty()) {
    os << " (" << note << ")";
    return os.str();
  }
  os << " max_rel_error=" << max_rel_error << " at input " << worst_input << " coord "
     << worst_coord << " (analytic=" << analytic << ", numeric=" << numeric << ")";
  return os.str();
}

GradCheckReport grad_check(const GradFn& fn, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& opts) {
  GradCheckReport rep;
  const GradResult base = fn(inputs);
  if (base.grads.size() != inputs.size()) {
    rep.note = "function returned " + std::to_string(base.grads.size()) +
               " gradients for " + std::to_string(inputs.size()) + " inputs";
    return rep;
  }
  if (!std::isfinite(base.value)) {
    rep.note = "function value is not finite";
    return rep;
  }

  Rng rng(opts.seed);
  rep.passed = true;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor& x = inputs[k];
    const Tensor& g = base.grads[k];
    if (g.shape() != x.shape()) {
      rep.passed = false;
      rep.note = "gradient " + std::to_string(k) + " has shape " + g.shape_string() +
                 ", expected " + x.shape_string();
      return rep;
    }

    // Pick the coordinates to probe: all of them, a seeded subsample, or the
    // strongest entries of the analytic gradient.
    std::vector<std::int64_t> coords;
    if (opts.max_coords > 0 && x.size() > opts.max_coords) {
      if (opts.policy == CoordPolicy::largest) {
        coords.resize(static_cast<std::size_t>(x.size()));
        for (std::int64_t i = 0; i < x.size(); ++i) coords[static_cast<std::size_t>(i)] = i;
        std::nth_element(coords.begin(), coords.begin() + opts.max_coords - 1,
                         coords.end(), [&g](std::int64_t a, std::int64_t b) {
                           return std::abs(g[a]) > std::abs(g[b]);
                         });
        coords.resize(static_cast<std::size_t>(opts.max_coords));
      } else {
        for (int i = 0; i < opts.max_coords; ++i) {
          coords.push_back(static_cast<std::int64_t>(rng.index(static_cast<std::size_t>(x.size()))));
        }
      }
      std::sort(coords.begin(), coords.end());
      coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    } else {
      coords.resize(static_cast<std::size_t>(x.size()));
      for (std::int64_t i = 0; i < x.size(); ++i) coords[static_cast<std::size_t>(i)] = i;
    }

    std::vector<Tensor> work = inputs;
    for (std::int64_t c : coords) {
      if (!std::isfinite(g[c])) {
        rep.passed = false;
        rep.note = "analytic gradient not finite at input " + std::to_string(k) +
                   " coord " + std::to_string(c);
        rep.worst_input = static_cast<int>(k);
        rep.worst_coord = c;
        return rep;
      }
      const double saved = work[k][c];
      work[k][c] = saved + opts.step;
      const double fp = fn(work).value;
      work[k][c] = saved - opts.step;
      const double fm = fn(work).value;
      work[k][c] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        rep.passed = false;
        rep.note = "perturbed value not finite at input " + std::to_string(k) + " coord " +
                   std::to_string(c);
        rep.worst_input = static_cast<int>(k);
        rep.worst_coord = c;
        return rep;
      }
      const double numeric = (fp - fm) / (2.0 * opts.step);
      const double denom = std::max({std::abs(g[c]), std::abs(numeric), 1e-8});
      const double rel = std::abs(g[c] - numeric) / denom;
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_input = static_cast<int>(k);
        rep.worst_coord = c;
        rep.analytic = g[c];
        rep.numeric = numeric;
      }
    }
  }
  rep.passed = rep.max_rel_error <= opts.tolerance;
  return rep;
}

}  // namespace lfsal
