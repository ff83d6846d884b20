#include "lfsal/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace lfsal {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// col layout: (cin*kh*kw) rows x (ho*wo) columns, row-major.
void im2col(const Tensor& x, int kh, int kw, int stride, int pad, int ho, int wo,
            std::vector<double>& col) {
  const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  col.assign(static_cast<std::size_t>(cin) * kh * kw * ho * wo, 0.0);
  for (int c = 0; c < cin; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        double* dst = col.data() +
                      static_cast<std::size_t>((c * kh + ky) * kw + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy, dst += wo) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          const double* src = x.data() + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ox] = src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<double>& col, int kh, int kw, int stride, int pad,
                int ho, int wo, Tensor& dx) {
  const int cin = dx.dim(0), h = dx.dim(1), w = dx.dim(2);
  for (int c = 0; c < cin; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const double* src = col.data() +
                            static_cast<std::size_t>((c * kh + ky) * kw + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy, src += wo) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* dst = dx.data() + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

struct AxisSpan {
  std::int64_t outer, len, inner;
};

AxisSpan axis_span(const Tensor& t, int axis) {
  if (axis < 0 || axis >= t.ndim()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for tensor " +
                     t.shape_string());
  }
  AxisSpan s{1, t.dim(axis), 1};
  for (int i = 0; i < axis; ++i) s.outer *= t.dim(i);
  for (int i = axis + 1; i < t.ndim(); ++i) s.inner *= t.dim(i);
  return s;
}

}  // namespace

Var Tape::push(Tensor value, std::function<void(Tape&, int)> back) {
  nodes_.push_back(Node{std::move(value), Tensor{}, false, std::move(back)});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(Var v) const {
  if (v.tape != this || v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    throw Error("variable does not belong to this tape");
  }
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  n.touched = true;
  return n.grad;
}

const Tensor& Tape::grad(Var v) const {
  check(v);
  return const_cast<Tape*>(this)->grad_buf(v.id);
}

Var Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "add");
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return push(std::move(out), [ai = a.id, bi = b.id](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& da = t.grad_buf(ai);
    Tensor& db = t.grad_buf(bi);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      da[i] += g[i];
      db[i] += g[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "sub");
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return push(std::move(out), [ai = a.id, bi = b.id](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& da = t.grad_buf(ai);
    Tensor& db = t.grad_buf(bi);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      da[i] += g[i];
      db[i] -= g[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  check(a);
  check(b);
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return push(std::move(out), [ai = a.id, bi = b.id](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& av = t.nodes_[ai].value;
    const Tensor& bv = t.nodes_[bi].value;
    Tensor& da = t.grad_buf(ai);
    Tensor& db = t.grad_buf(bi);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      da[i] += g[i] * bv[i];
      db[i] += g[i] * av[i];
    }
  });
}

Var Tape::scale(Var a, double s) {
  check(a);
  const Tensor& av = value(a);
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  return push(std::move(out), [ai = a.id, s](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& da = t.grad_buf(ai);
    for (std::int64_t i = 0; i < g.size(); ++i) da[i] += g[i] * s;
  });
}

Var Tape::add_scalar(Var a, double s) {
  check(a);
  const Tensor& av = value(a);
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] + s;
  return push(std::move(out), [ai = a.id](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& da = t.grad_buf(ai);
    for (std::int64_t i = 0; i < g.size(); ++i) da[i] += g[i];
  });
}

Var Tape::mul_const(Var a, Tensor factor) {
  check(a);
  const Tensor& av = value(a);
  require_same_shape(av, factor, "mul_const");
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor[i];
  return push(std::move(out), [ai = a.id, f = std::move(factor)](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& da = t.grad_buf(ai);
    for (std::int64_t i = 0; i < g.size(); ++i) da[i] += g[i] * f[i];
  });
}

Var Tape::scale_by(Var a, Var s) {
  check(a);
  check(s);
  const Tensor& av = value(a);
  const Tensor& sv = value(s);
  if (sv.size() != 1) {
    throw ShapeError("scale_by expects a size-1 scalar, got " + sv.shape_string());
  }
  Tensor out(av.shape());
  const double sc = sv[0];
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] * sc;
  return push(std::move(out), [ai = a.id, si = s.id](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& av = t.nodes_[ai].value;
    const double sc = t.nodes_[si].value[0];
    Tensor& da = t.grad_buf(ai);
    Tensor& ds = t.grad_buf(si);
    double acc = 0.0;
    for (std::int64_t i = 0; i < g.size(); ++i) {
      da[i] += g[i] * sc;
      acc += g[i] * av[i];
    }
    ds[0] += acc;
  });
}

Var Tape::mul_channel_bcast(Var a, Var map) {
  check(a);
  check(map);
  const Tensor& av = value(a);
  const Tensor& mv = value(map);
  if (av.ndim() != 3 || mv.ndim() != 3 || mv.dim(0) != 1 || mv.dim(1) != av.dim(1) ||
      mv.dim(2) != av.dim(2)) {
    throw ShapeError("mul_channel_bcast: input " + av.shape_string() + " and map " +
                     mv.shape_string() + " must share (h,w) with map channels == 1");
  }
  const int c = av.dim(0);
  const std::int64_t hw = static_cast<std::int64_t>(av.dim(1)) * av.dim(2);
  Tensor out(av.shape());
  for (int ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < hw; ++i) out[ch * hw + i] = av[ch * hw + i] * mv[i];
  }
  return push(std::move(out), [ai = a.id, mi = map.id, c, hw](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& av = t.nodes_[ai].value;
    const Tensor& mv = t.nodes_[mi].value;
    Tensor& da = t.grad_buf(ai);
    Tensor& dm = t.grad_buf(mi);
    for (int ch = 0; ch < c; ++ch) {
      for (std::int64_t i = 0; i < hw; ++i) {
        da[ch * hw + i] += g[ch * hw + i] * mv[i];
        dm[i] += g[ch * hw + i] * av[ch * hw + i];
      }
    }
  });
}

Var Tape::relu(Var a) {
  check(a);
  const Tensor& av = value(a);
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  return push(std::move(out), [ai = a.id](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& av = t.nodes_[ai].value;
    Tensor& da = t.grad_buf(ai);
    for (std::int64_t i = 0; i < g.size(); ++i) {
      if (av[i] > 0.0) da[i] += g[i];
    }
  });
}

Var Tape::sigmoid(Var a) {
  check(a);
  const Tensor& av = value(a);
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(av[i]);
  return push(std::move(out), [ai = a.id](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    Tensor& da = t.grad_buf(ai);
    for (std::int64_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::tanh(Var a) {
  check(a);
  const Tensor& av = value(a);
  Tensor out(av.shape());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  return push(std::move(out), [ai = a.id](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    Tensor& da = t.grad_buf(ai);
    for (std::int64_t i = 0; i < g.size(); ++i) da[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var Tape::softmax(Var a, int axis) {
  check(a);
  const Tensor& av = value(a);
  const AxisSpan sp = axis_span(av, axis);
  Tensor out(av.shape());
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    for (std::int64_t in = 0; in < sp.inner; ++in) {
      const std::int64_t base = o * sp.len * sp.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t j = 0; j < sp.len; ++j) mx = std::max(mx, av[base + j * sp.inner]);
      double z = 0.0;
      for (std::int64_t j = 0; j < sp.len; ++j) {
        const double e = std::exp(av[base + j * sp.inner] - mx);
        out[base + j * sp.inner] = e;
        z += e;
      }
      for (std::int64_t j = 0; j < sp.len; ++j) out[base + j * sp.inner] /= z;
    }
  }
  return push(std::move(out), [ai = a.id, sp](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    Tensor& da = t.grad_buf(ai);
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      for (std::int64_t in = 0; in < sp.inner; ++in) {
        const std::int64_t base = o * sp.len * sp.inner + in;
        double dot = 0.0;
        for (std::int64_t j = 0; j < sp.len; ++j) {
          dot += g[base + j * sp.inner] * y[base + j * sp.inner];
        }
        for (std::int64_t j = 0; j < sp.len; ++j) {
          da[base + j * sp.inner] +=
              y[base + j * sp.inner] * (g[base + j * sp.inner] - dot);
        }
      }
    }
  });
}

Var Tape::conv2d(Var input, Var weights, Var bias, int stride, int pad) {
  check(input);
  check(weights);
  check(bias);
  const Tensor& x = value(input);
  const Tensor& wt = value(weights);
  const Tensor& bs = value(bias);
  if (x.ndim() != 3) throw ShapeError("conv2d: input must be (c,h,w), got " + x.shape_string());
  if (wt.ndim() != 4) {
    throw ShapeError("conv2d: weights must be (out,in,kh,kw), got " + wt.shape_string());
  }
  if (wt.dim(1) != x.dim(0)) {
    throw ShapeError("conv2d: weight input-channel axis (" + std::to_string(wt.dim(1)) +
                     ") != input channel axis (" + std::to_string(x.dim(0)) + ")");
  }
  if (bs.ndim() != 1 || bs.dim(0) != wt.dim(0)) {
    throw ShapeError("conv2d: bias must be (" + std::to_string(wt.dim(0)) + "), got " +
                     bs.shape_string());
  }
  if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (pad < 0) throw ShapeError("conv2d: padding must be >= 0");
  const int cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int cout = wt.dim(0), kh = wt.dim(2), kw = wt.dim(3);
  if (kh > h + 2 * pad || kw > w + 2 * pad) {
    throw ShapeError("conv2d: kernel (" + std::to_string(kh) + "x" + std::to_string(kw) +
                     ") exceeds padded input (" + std::to_string(h + 2 * pad) + "x" +
                     std::to_string(w + 2 * pad) + ")");
  }
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;

  std::vector<double> col;
  im2col(x, kh, kw, stride, pad, ho, wo, col);
  const std::int64_t krows = static_cast<std::int64_t>(cin) * kh * kw;
  const std::int64_t ncols = static_cast<std::int64_t>(ho) * wo;

  Tensor out({cout, ho, wo});
  {
    CMapRM wm(wt.data(), cout, krows);
    CMapRM cm(col.data(), krows, ncols);
    MapRM ym(out.data(), cout, ncols);
    ym.noalias() = wm * cm;
    for (int c = 0; c < cout; ++c) ym.row(c).array() += bs[c];
  }

  return push(std::move(out), [xi = input.id, wi = weights.id, bi = bias.id, stride, pad,
                               cin, h, w, cout, kh, kw, ho, wo](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& x = t.nodes_[xi].value;
    const Tensor& wt = t.nodes_[wi].value;
    const std::int64_t krows = static_cast<std::int64_t>(cin) * kh * kw;
    const std::int64_t ncols = static_cast<std::int64_t>(ho) * wo;

    std::vector<double> col;
    im2col(x, kh, kw, stride, pad, ho, wo, col);

    CMapRM gm(g.data(), cout, ncols);
    CMapRM cm(col.data(), krows, ncols);
    CMapRM wm(wt.data(), cout, krows);

    MapRM dwm(t.grad_buf(wi).data(), cout, krows);
    dwm.noalias() += gm * cm.transpose();

    // Sequential accumulation: Eigen's vectorized reductions split at an
    // alignment boundary that depends on where the heap placed the buffer,
    // which would make results vary with process allocation history.
    Tensor& db = t.grad_buf(bi);
    for (int c = 0; c < cout; ++c) {
      const double* row = g.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(ncols);
      double s = 0.0;
      for (std::int64_t i = 0; i < ncols; ++i) s += row[i];
      db[c] += s;
    }

    std::vector<double> dcol(static_cast<std::size_t>(krows) * ncols);
    MapRM dcm(dcol.data(), krows, ncols);
    dcm.noalias() = wm.transpose() * gm;
    col2im_add(dcol, kh, kw, stride, pad, ho, wo, t.grad_buf(xi));
  });
}

Var Tape::concat_channels(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  int ctotal = 0;
  const Tensor& first = value(xs[0]);
  if (first.ndim() != 3) {
    throw ShapeError("concat_channels: inputs must be (c,h,w), got " + first.shape_string());
  }
  for (const Var& v : xs) {
    check(v);
    const Tensor& t = value(v);
    if (t.ndim() != 3 || t.dim(1) != first.dim(1) || t.dim(2) != first.dim(2)) {
      throw ShapeError("concat_channels: spatial axes differ: " + first.shape_string() +
                       " vs " + t.shape_string());
    }
    ctotal += t.dim(0);
  }
  const std::int64_t hw = static_cast<std::int64_t>(first.dim(1)) * first.dim(2);
  Tensor out({ctotal, first.dim(1), first.dim(2)});
  std::vector<int> ids;
  std::vector<int> chans;
  std::int64_t off = 0;
  for (const Var& v : xs) {
    const Tensor& t = value(v);
    std::copy(t.data(), t.data() + t.size(), out.data() + off);
    off += t.size();
    ids.push_back(v.id);
    chans.push_back(t.dim(0));
  }
  return push(std::move(out), [ids, chans, hw](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    std::int64_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Tensor& d = t.grad_buf(ids[k]);
      const std::int64_t n = static_cast<std::int64_t>(chans[k]) * hw;
      for (std::int64_t i = 0; i < n; ++i) d[i] += g[off + i];
      off += n;
    }
  });
}

Var Tape::slice_channels(Var a, int c0, int c1) {
  check(a);
  const Tensor& av = value(a);
  if (av.ndim() != 3 || c0 < 0 || c1 > av.dim(0) || c0 >= c1) {
    throw ShapeError("slice_channels: range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") invalid for " + av.shape_string());
  }
  const std::int64_t hw = static_cast<std::int64_t>(av.dim(1)) * av.dim(2);
  Tensor out({c1 - c0, av.dim(1), av.dim(2)});
  std::copy(av.data() + c0 * hw, av.data() + c1 * hw, out.data());
  return push(std::move(out), [ai = a.id, c0, hw](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& da = t.grad_buf(ai);
    for (std::int64_t i = 0; i < g.size(); ++i) da[c0 * hw + i] += g[i];
  });
}

Var Tape::global_avg_pool(Var a) {
  check(a);
  const Tensor& av = value(a);
  if (av.ndim() != 3) {
    throw ShapeError("global_avg_pool: input must be (c,h,w), got " + av.shape_string());
  }
  const int c = av.dim(0);
  const std::int64_t hw = static_cast<std::int64_t>(av.dim(1)) * av.dim(2);
  Tensor out({c, 1, 1});
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::int64_t i = 0; i < hw; ++i) s += av[ch * hw + i];
    out[ch] = s / static_cast<double>(hw);
  }
  return push(std::move(out), [ai = a.id, c, hw](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& da = t.grad_buf(ai);
    for (int ch = 0; ch < c; ++ch) {
      const double gv = g[ch] / static_cast<double>(hw);
      for (std::int64_t i = 0; i < hw; ++i) da[ch * hw + i] += gv;
    }
  });
}

Var Tape::upsample_bilinear(Var a, int oh, int ow) {
  check(a);
  const Tensor& av = value(a);
  if (av.ndim() != 3) {
    throw ShapeError("upsample_bilinear: input must be (c,h,w), got " + av.shape_string());
  }
  if (oh < 1 || ow < 1) throw ShapeError("upsample_bilinear: target size must be positive");
  const int c = av.dim(0), h = av.dim(1), w = av.dim(2);

  // Corner-aligned sampling positions, computed once per axis.
  struct Lerp {
    int i0, i1;
    double t;
  };
  auto make_axis = [](int in, int out) {
    std::vector<Lerp> m(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      const double s =
          out > 1 ? static_cast<double>(o) * (in - 1) / static_cast<double>(out - 1) : 0.0;
      int i0 = static_cast<int>(std::floor(s));
      if (i0 > in - 1) i0 = in - 1;
      const int i1 = std::min(i0 + 1, in - 1);
      m[static_cast<std::size_t>(o)] = Lerp{i0, i1, s - i0};
    }
    return m;
  };
  const auto ys = make_axis(h, oh);
  const auto xs = make_axis(w, ow);

  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch) {
    const double* src = av.data() + static_cast<std::int64_t>(ch) * h * w;
    double* dst = out.data() + static_cast<std::int64_t>(ch) * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      const Lerp& ly = ys[static_cast<std::size_t>(oy)];
      for (int ox = 0; ox < ow; ++ox) {
        const Lerp& lx = xs[static_cast<std::size_t>(ox)];
        const double v00 = src[ly.i0 * w + lx.i0];
        const double v01 = src[ly.i0 * w + lx.i1];
        const double v10 = src[ly.i1 * w + lx.i0];
        const double v11 = src[ly.i1 * w + lx.i1];
        dst[oy * ow + ox] = (1 - ly.t) * ((1 - lx.t) * v00 + lx.t * v01) +
                            ly.t * ((1 - lx.t) * v10 + lx.t * v11);
      }
    }
  }
  return push(std::move(out), [ai = a.id, c, h, w, oh, ow, ys, xs](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& da = t.grad_buf(ai);
    for (int ch = 0; ch < c; ++ch) {
      double* dst = da.data() + static_cast<std::int64_t>(ch) * h * w;
      const double* src = g.data() + static_cast<std::int64_t>(ch) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        const auto& ly = ys[static_cast<std::size_t>(oy)];
        for (int ox = 0; ox < ow; ++ox) {
          const auto& lx = xs[static_cast<std::size_t>(ox)];
          const double gv = src[oy * ow + ox];
          dst[ly.i0 * w + lx.i0] += (1 - ly.t) * (1 - lx.t) * gv;
          dst[ly.i0 * w + lx.i1] += (1 - ly.t) * lx.t * gv;
          dst[ly.i1 * w + lx.i0] += ly.t * (1 - lx.t) * gv;
          dst[ly.i1 * w + lx.i1] += ly.t * lx.t * gv;
        }
      }
    }
  });
}

Var Tape::reshape(Var a, std::vector<int> shape) {
  check(a);
  const Tensor& av = value(a);
  Tensor out(shape);
  if (out.size() != av.size()) {
    throw ShapeError("reshape: element count " + std::to_string(av.size()) +
                     " does not fit shape " + out.shape_string());
  }
  std::copy(av.data(), av.data() + av.size(), out.data());
  return push(std::move(out), [ai = a.id](Tape& t, int self) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& da = t.grad_buf(ai);
    for (std::int64_t i = 0; i < g.size(); ++i) da[i] += g[i];
  });
}

Var Tape::sum(Var a) {
  check(a);
  const Tensor& av = value(a);
  Tensor out({1});
  out[0] = av.sum();
  return push(std::move(out), [ai = a.id](Tape& t, int self) {
    const double g = t.nodes_[self].grad[0];
    Tensor& da = t.grad_buf(ai);
    for (std::int64_t i = 0; i < da.size(); ++i) da[i] += g;
  });
}

Var Tape::sum_scalars_sorted(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("sum_scalars_sorted: no inputs");
  std::vector<double> vals;
  std::vector<int> ids;
  for (const Var& v : xs) {
    check(v);
    if (value(v).size() != 1) {
      throw ShapeError("sum_scalars_sorted: inputs must be scalars, got " +
                       value(v).shape_string());
    }
    vals.push_back(value(v)[0]);
    ids.push_back(v.id);
  }
  std::sort(vals.begin(), vals.end());
  double s = 0.0;
  for (double v : vals) s += v;
  return push(Tensor::scalar(s), [ids](Tape& t, int self) {
    const double g = t.nodes_[self].grad[0];
    for (int id : ids) t.grad_buf(id)[0] += g;
  });
}

Var Tape::bce_sum(Var pred, Tensor target, double eps) {
  check(pred);
  const Tensor& pv = value(pred);
  require_same_shape(pv, target, "bce_sum");
  // Compensated accumulation: keeps the sum's rounding error near one ulp,
  // which finite-difference verification of near-zero gradients relies on.
  double loss = 0.0, carry = 0.0;
  for (std::int64_t i = 0; i < pv.size(); ++i) {
    const double p = std::clamp(pv[i], eps, 1.0 - eps);
    const double term = -(target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p));
    const double y = term - carry;
    const double t = loss + y;
    carry = (t - loss) - y;
    loss = t;
  }
  return push(Tensor::scalar(loss),
              [pi = pred.id, tgt = std::move(target), eps](Tape& t, int self) {
                const double g = t.nodes_[self].grad[0];
                const Tensor& pv = t.nodes_[pi].value;
                Tensor& dp = t.grad_buf(pi);
                for (std::int64_t i = 0; i < pv.size(); ++i) {
                  if (pv[i] <= eps || pv[i] >= 1.0 - eps) continue;  // clamped: flat
                  dp[i] += g * (pv[i] - tgt[i]) / (pv[i] * (1.0 - pv[i]));
                }
              });
}

void Tape::backward(Var root) {
  check(root);
  if (backward_done_) throw Error("backward already run on this tape");
  backward_done_ = true;
  if (value(root).size() != 1) {
    throw Error("backward root must be scalar, got " + value(root).shape_string());
  }
  grad_buf(root.id)[0] = 1.0;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.touched && n.back) n.back(*this, id);
  }
}

}  // namespace lfsal
