#include "lfsal/network.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "lfsal/forgetting.hpp"
#include "lfsal/jsonio.hpp"
#include "lfsal/rng.hpp"

namespace lfsal {

const char* pixel_attention_name(PixelAttentionMode mode) {
  return mode == PixelAttentionMode::spatial_softmax ? "spatial_softmax" : "sigmoid";
}

PixelAttentionMode pixel_attention_from_name(const std::string& name) {
  if (name == "spatial_softmax") return PixelAttentionMode::spatial_softmax;
  if (name == "sigmoid") return PixelAttentionMode::sigmoid;
  throw ConfigError("unknown pixel attention mode '" + name +
                    "' (expected spatial_softmax or sigmoid)");
}

void NetConfig::validate() const {
  if (k < 1) throw ConfigError("network needs k >= 1 slices, got " + std::to_string(k));
  if (levels < 2 || levels > 4) {
    throw ConfigError("network levels must lie in [2,4], got " + std::to_string(levels));
  }
  if (static_cast<int>(widths.size()) != levels) {
    throw ConfigError("network needs one width per level: " +
                      std::to_string(widths.size()) + " widths for " +
                      std::to_string(levels) + " levels");
  }
  for (int w : widths) {
    if (w < 1) throw ConfigError("channel widths must be positive");
  }
  if (fuse_kernel < 1 || fuse_kernel % 2 == 0) {
    throw ConfigError("fusion kernel must be odd and positive, got " +
                      std::to_string(fuse_kernel));
  }
}

nlohmann::json net_config_to_json(const NetConfig& c) {
  return {{"k", c.k},
          {"levels", c.levels},
          {"widths", c.widths},
          {"mutual_fusion", c.mutual_fusion},
          {"pixel_attention", pixel_attention_name(c.pixel_attention)},
          {"fuse_kernel", c.fuse_kernel}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
  require_known_keys(j, {"k", "levels", "widths", "mutual_fusion", "pixel_attention",
                         "fuse_kernel"},
                     "network config");
  NetConfig c;
  c.k = j.value("k", c.k);
  c.levels = j.value("levels", c.levels);
  if (j.contains("widths")) c.widths = j["widths"].get<std::vector<int>>();
  c.mutual_fusion = j.value("mutual_fusion", c.mutual_fusion);
  if (j.contains("pixel_attention")) {
    c.pixel_attention = pixel_attention_from_name(j["pixel_attention"].get<std::string>());
  }
  c.fuse_kernel = j.value("fuse_kernel", c.fuse_kernel);
  c.validate();
  return c;
}

ChannelAttention channel_attention(Tape& tape, Var allfocus,
                                   const std::vector<Var>& slices, Var w_slice,
                                   Var b_slice, Var w_af, Var b_af) {
  if (slices.empty()) {
    throw ShapeError("channel attention needs at least one slice");
  }
  std::vector<Var> logits;
  logits.reserve(slices.size() + 1);
  for (Var s : slices) {
    logits.push_back(tape.conv2d(tape.global_avg_pool(s), w_slice, b_slice));
  }
  logits.push_back(tape.conv2d(tape.global_avg_pool(allfocus), w_af, b_af));
  Var att = tape.softmax(tape.concat_channels(logits), 0);

  ChannelAttention out{att, {}};
  out.weighted.reserve(slices.size());
  for (int i = 0; i < static_cast<int>(slices.size()); ++i) {
    out.weighted.push_back(tape.scale_by(slices[i], tape.slice_channels(att, i, i + 1)));
  }
  return out;
}

Var conv_lstm(Tape& tape, const std::vector<Var>& sequence, Var gate_w, Var gate_b) {
  if (sequence.empty()) {
    throw ShapeError("recurrence needs a non-empty sequence");
  }
  int c = 0, h = 0, w = 0;
  {
    const Tensor& x0 = tape.value(sequence.front());
    if (x0.ndim() != 3) {
      throw ShapeError("recurrence inputs must be (c,h,w), got " + x0.shape_string());
    }
    c = x0.dim(0);
    h = x0.dim(1);
    w = x0.dim(2);
  }
  int pad = 0;
  {
    const Tensor& gw = tape.value(gate_w);
    if (gw.ndim() != 4 || gw.dim(0) != 4 * c || gw.dim(1) != 2 * c ||
        gw.dim(2) % 2 == 0 || gw.dim(3) % 2 == 0) {
      throw ShapeError("gate weights must be (4c,2c,odd,odd) for c=" +
                       std::to_string(c) + ", got " + gw.shape_string());
    }
    pad = gw.dim(2) / 2;
  }
  Var hidden = tape.leaf(Tensor::zeros({c, h, w}));
  Var cell = tape.leaf(Tensor::zeros({c, h, w}));
  for (Var x : sequence) {
    Var gates =
        tape.conv2d(tape.concat_channels({x, hidden}), gate_w, gate_b, 1, pad);
    Var in_gate = tape.sigmoid(tape.slice_channels(gates, 0, c));
    Var forget_gate = tape.sigmoid(tape.slice_channels(gates, c, 2 * c));
    Var out_gate = tape.sigmoid(tape.slice_channels(gates, 2 * c, 3 * c));
    Var candidate = tape.tanh(tape.slice_channels(gates, 3 * c, 4 * c));
    cell = tape.add(tape.mul(forget_gate, cell), tape.mul(in_gate, candidate));
    hidden = tape.mul(out_gate, tape.tanh(cell));
  }
  return hidden;
}

Var pixel_guidance(Tape& tape, Var allfocus_feat, Var refined, Var w, Var b,
                   PixelAttentionMode mode) {
  Var logits = tape.conv2d(refined, w, b);
  int h = 0, ww = 0;
  {
    const Tensor& lv = tape.value(logits);
    if (lv.dim(0) != 1) {
      throw ShapeError("pixel attention conv must produce one channel, got " +
                       lv.shape_string());
    }
    h = lv.dim(1);
    ww = lv.dim(2);
  }
  Var att;
  if (mode == PixelAttentionMode::spatial_softmax) {
    att = tape.reshape(tape.softmax(tape.reshape(logits, {h * ww}), 0), {1, h, ww});
  } else {
    att = tape.sigmoid(logits);
  }
  return tape.add(tape.mul_channel_bcast(allfocus_feat, att), allfocus_feat);
}

Var stream_head(Tape& tape, const std::vector<Var>& levels,
                const std::vector<Var>& lateral_w, const std::vector<Var>& lateral_b,
                Var cell_w, Var cell_b, Var trans_w, Var trans_b, int out_h,
                int out_w) {
  if (levels.empty()) throw ShapeError("head needs at least one level");
  if (lateral_w.size() != levels.size() || lateral_b.size() != levels.size()) {
    throw ShapeError("head needs one lateral conv per level");
  }
  int th = 0, tw = 0;
  {
    const Tensor& finest = tape.value(levels.front());
    th = finest.dim(1);
    tw = finest.dim(2);
  }
  std::vector<Var> sequence;  // coarsest level first
  sequence.reserve(levels.size());
  for (int l = static_cast<int>(levels.size()) - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    Var x = tape.conv2d(levels[li], lateral_w[li], lateral_b[li]);
    int xh = 0, xw = 0;
    {
      const Tensor& xv = tape.value(x);
      xh = xv.dim(1);
      xw = xv.dim(2);
    }
    if (xh != th || xw != tw) x = tape.upsample_bilinear(x, th, tw);
    sequence.push_back(x);
  }
  Var hidden = conv_lstm(tape, sequence, cell_w, cell_b);
  Var prob = tape.sigmoid(tape.conv2d(hidden, trans_w, trans_b));
  int ph = 0, pw = 0;
  {
    const Tensor& pv = tape.value(prob);
    ph = pv.dim(1);
    pw = pv.dim(2);
  }
  if (ph != out_h || pw != out_w) prob = tape.upsample_bilinear(prob, out_h, out_w);
  return prob;
}

namespace {

struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  int fan_in;
};

std::vector<ParamSpec> param_specs(const NetConfig& cfg) {
  std::vector<ParamSpec> specs;
  auto conv = [&specs](const std::string& name, int cout, int cin, int kh, int kw) {
    specs.push_back({name + ".w", {cout, cin, kh, kw}, cin * kh * kw});
    specs.push_back({name + ".b", {cout}, cin * kh * kw});
  };
  for (const char* stream : {"enc_af", "enc_sl"}) {
    int prev = 1;
    for (int s = 0; s < cfg.levels; ++s) {
      const int width = cfg.widths[static_cast<std::size_t>(s)];
      const std::string stage = std::string(stream) + ".s" + std::to_string(s);
      conv(stage + ".c0", width, prev, 3, 3);
      conv(stage + ".c1", width, width, 3, 3);
      prev = width;
    }
  }
  if (cfg.mutual_fusion) {
    for (int l = 0; l < cfg.levels; ++l) {
      const int c = cfg.widths[static_cast<std::size_t>(l)];
      const std::string lvl = ".l" + std::to_string(l);
      conv("att" + lvl + ".slice", 1, c, 1, 1);
      conv("att" + lvl + ".af", 1, c, 1, 1);
      conv("refine" + lvl + ".gate", 4 * c, 2 * c, 3, 3);
      // A spatial softmax is shift-invariant, so a bias on its logit conv
      // would be a dead (non-identifiable) parameter; only the sigmoid
      // normalization gets one.
      specs.push_back({"guide" + lvl + ".w", {1, c, 1, 1}, c});
      if (cfg.pixel_attention == PixelAttentionMode::sigmoid) {
        specs.push_back({"guide" + lvl + ".b", {1}, c});
      }
    }
  }
  const int head_c = cfg.widths.front();
  for (const char* stream : {"head_f", "head_r"}) {
    for (int l = 0; l < cfg.levels; ++l) {
      conv(std::string(stream) + ".lat" + std::to_string(l), head_c,
           cfg.widths[static_cast<std::size_t>(l)], 1, 1);
    }
    conv(std::string(stream) + ".cell", 4 * head_c, 2 * head_c, 3, 3);
    conv(std::string(stream) + ".out", 1, head_c, 1, 1);
  }
  conv("fuse", 1, 2, cfg.fuse_kernel, cfg.fuse_kernel);
  return specs;
}

Var named(const std::map<std::string, Var>& pv, const std::string& name) {
  const auto it = pv.find(name);
  if (it == pv.end()) throw StateError("no bound parameter named '" + name + "'");
  return it->second;
}

}  // namespace

Network::Network(NetConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

ParameterSet Network::init_params(std::uint64_t seed) const {
  auto specs = param_specs(cfg_);
  std::sort(specs.begin(), specs.end(),
            [](const ParamSpec& a, const ParamSpec& b) { return a.name < b.name; });
  Rng rng(seed);
  ParameterSet params;
  for (const auto& spec : specs) {
    Tensor t(spec.shape);
    if (spec.name.size() > 2 && spec.name.compare(spec.name.size() - 2, 2, ".b") == 0) {
      // Encoder biases start slightly positive so no ReLU channel is born
      // dead; gate/projection biases start neutral.
      if (spec.name.rfind("enc_", 0) == 0) t.fill(0.1);
    } else {
      const double bound = std::sqrt(1.0 / static_cast<double>(spec.fan_in));
      for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    }
    params.insert(spec.name, std::move(t));
  }
  return params;
}

std::map<std::string, Var> Network::bind(Tape& tape, const ParameterSet& params) {
  std::map<std::string, Var> out;
  for (const auto& [name, tensor] : params) {
    out.emplace(name, tape.leaf(tensor));
  }
  return out;
}

std::vector<Var> Network::encode(Tape& tape, const Tensor& image,
                                 const std::map<std::string, Var>& pv,
                                 bool slice_stream) const {
  if (image.ndim() != 3 || image.dim(0) != 1) {
    throw ShapeError("encoder input must be (1,h,w), got " + image.shape_string());
  }
  const int factor = 1 << cfg_.levels;
  if (image.dim(1) % factor != 0 || image.dim(2) % factor != 0) {
    throw ShapeError("input " + std::to_string(image.dim(1)) + "x" +
                     std::to_string(image.dim(2)) + " is not divisible by " +
                     std::to_string(factor));
  }
  const std::string prefix = slice_stream ? "enc_sl" : "enc_af";
  std::vector<Var> feats;
  feats.reserve(static_cast<std::size_t>(cfg_.levels));
  Var cur = tape.leaf(image);
  for (int s = 0; s < cfg_.levels; ++s) {
    const std::string stage = prefix + ".s" + std::to_string(s);
    cur = tape.relu(
        tape.conv2d(cur, named(pv, stage + ".c0.w"), named(pv, stage + ".c0.b"), 2, 1));
    cur = tape.relu(
        tape.conv2d(cur, named(pv, stage + ".c1.w"), named(pv, stage + ".c1.b"), 1, 1));
    feats.push_back(cur);
  }
  return feats;
}

NetOutputs Network::forward(Tape& tape, const Tensor& allfocus,
                            const std::vector<Tensor>& slices,
                            const std::map<std::string, Var>& pv,
                            const Tensor* conf_f, const Tensor* conf_r) const {
  if (allfocus.ndim() != 3 || allfocus.dim(0) != 1) {
    throw ShapeError("all-focus input must be (1,h,w), got " + allfocus.shape_string());
  }
  if (static_cast<int>(slices.size()) != cfg_.k) {
    throw ShapeError("expected " + std::to_string(cfg_.k) + " slices, got " +
                     std::to_string(slices.size()));
  }
  for (const Tensor& s : slices) require_same_shape(s, allfocus, "network slices");
  const int h = allfocus.dim(1);
  const int w = allfocus.dim(2);

  const std::vector<Var> r = encode(tape, allfocus, pv, false);
  std::vector<std::vector<Var>> f(static_cast<std::size_t>(cfg_.levels));
  for (const Tensor& slice : slices) {
    const auto feats = encode(tape, slice, pv, true);
    for (int l = 0; l < cfg_.levels; ++l) {
      f[static_cast<std::size_t>(l)].push_back(feats[static_cast<std::size_t>(l)]);
    }
  }

  std::vector<Var> f_ref, r_ref;  // refined pyramids, finest first
  f_ref.reserve(f.size());
  r_ref.reserve(f.size());
  for (int l = 0; l < cfg_.levels; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const std::string lvl = ".l" + std::to_string(l);
    if (cfg_.mutual_fusion) {
      const auto att = channel_attention(
          tape, r[li], f[li], named(pv, "att" + lvl + ".slice.w"),
          named(pv, "att" + lvl + ".slice.b"), named(pv, "att" + lvl + ".af.w"),
          named(pv, "att" + lvl + ".af.b"));
      f_ref.push_back(conv_lstm(tape, att.weighted, named(pv, "refine" + lvl + ".gate.w"),
                                named(pv, "refine" + lvl + ".gate.b")));
      const Var guide_b = cfg_.pixel_attention == PixelAttentionMode::sigmoid
                              ? named(pv, "guide" + lvl + ".b")
                              : tape.leaf(Tensor::zeros({1}));
      r_ref.push_back(pixel_guidance(tape, r[li], f_ref.back(),
                                     named(pv, "guide" + lvl + ".w"), guide_b,
                                     cfg_.pixel_attention));
    } else {
      Var acc = f[li].front();
      for (std::size_t i = 1; i < f[li].size(); ++i) acc = tape.add(acc, f[li][i]);
      f_ref.push_back(tape.scale(acc, 1.0 / static_cast<double>(cfg_.k)));
      r_ref.push_back(r[li]);
    }
  }

  auto head = [&](const std::vector<Var>& pyramid, const std::string& prefix) {
    std::vector<Var> lw, lb;
    lw.reserve(pyramid.size());
    lb.reserve(pyramid.size());
    for (int l = 0; l < cfg_.levels; ++l) {
      lw.push_back(named(pv, prefix + ".lat" + std::to_string(l) + ".w"));
      lb.push_back(named(pv, prefix + ".lat" + std::to_string(l) + ".b"));
    }
    return stream_head(tape, pyramid, lw, lb, named(pv, prefix + ".cell.w"),
                       named(pv, prefix + ".cell.b"), named(pv, prefix + ".out.w"),
                       named(pv, prefix + ".out.b"), h, w);
  };
  Var s_f = head(f_ref, "head_f");
  Var s_r = head(r_ref, "head_r");

  const Tensor m_f = conf_f ? *conf_f : Tensor::ones({h, w});
  const Tensor m_r = conf_r ? *conf_r : Tensor::ones({h, w});
  Var s_i = guided_fuse(tape, s_f, s_r, m_f, m_r, named(pv, "fuse.w"),
                        named(pv, "fuse.b"), h, w);
  return {s_f, s_r, s_i};
}

}  // namespace lfsal
