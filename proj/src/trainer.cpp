#include "lfsal/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>

#include "lfsal/error.hpp"
#include "lfsal/evalkit.hpp"
#include "lfsal/jsonio.hpp"
#include "lfsal/noiseloss.hpp"
#include "lfsal/rng.hpp"

namespace lfsal {

namespace {

constexpr double kAdamEps = 1e-8;
constexpr int kCropPad = 4;  // reflect margin; offsets drawn in [0, 2*pad]

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::mffo: return "mffo";
    case Variant::pfm: return "pfm";
    case Variant::ploss: return "ploss";
    case Variant::full: return "full";
  }
  throw ConfigError("unknown variant value");
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : {Variant::baseline, Variant::mffo, Variant::pfm, Variant::ploss,
                    Variant::full}) {
    if (name == variant_name(v)) return v;
  }
  throw ConfigError("unknown variant '" + name +
                    "' (expected baseline|mffo|pfm|ploss|full)");
}

VariantSwitches variant_switches(Variant v) {
  VariantSwitches s;
  s.mutual_fusion = v == Variant::mffo || v == Variant::full;
  s.forgetting_guided = v == Variant::pfm || v == Variant::full;
  s.peer_penalty = v == Variant::ploss || v == Variant::full;
  return s;
}

NetConfig TrainConfig::effective_net() const {
  NetConfig n = net;
  n.mutual_fusion = variant_switches(variant).mutual_fusion;
  return n;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (ml < 2) throw ConfigError("ml must be >= 2, got " + std::to_string(ml));
  if (batch < ml) {
    throw ConfigError("batch (" + std::to_string(batch) + ") must be >= ml (" +
                      std::to_string(ml) + ") so peer groups are drawable");
  }
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
  if (!(a > 0.0)) throw ConfigError("a must be > 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
  const VariantSwitches sw = variant_switches(variant);
  if (sw.peer_penalty && alpha > 0.0 && batch < 3) {
    throw ConfigError("cross-scene penalty needs batches of >= 3 samples");
  }
  if ((flip || crop || rotate) && sw.forgetting_guided) {
    throw ConfigError(
        "spatial augmentation cannot be combined with forgetting tracking: "
        "event counts are per pixel and need a stable pixel identity");
  }
  effective_net().validate();
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return nlohmann::json{{"variant", variant_name(cfg.variant)},
                        {"net", net_config_to_json(cfg.effective_net())},
                        {"epochs", cfg.epochs},
                        {"lr", cfg.lr},
                        {"beta1", cfg.beta1},
                        {"beta2", cfg.beta2},
                        {"batch", cfg.batch},
                        {"seed", cfg.seed},
                        {"delta", cfg.delta},
                        {"a", cfg.a},
                        {"alpha", cfg.alpha},
                        {"ml", cfg.ml},
                        {"flip", cfg.flip},
                        {"crop", cfg.crop},
                        {"rotate", cfg.rotate}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  require_known_keys(j,
                     {"variant", "net", "epochs", "lr", "beta1", "beta2", "batch",
                      "seed", "delta", "a", "alpha", "ml", "flip", "crop", "rotate"},
                     "train config");
  TrainConfig cfg;
  try {
    if (j.contains("variant")) cfg.variant = variant_from_name(j.at("variant").get<std::string>());
    if (j.contains("net")) cfg.net = net_config_from_json(j.at("net"));
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.beta1 = j.value("beta1", cfg.beta1);
    cfg.beta2 = j.value("beta2", cfg.beta2);
    cfg.batch = j.value("batch", cfg.batch);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.delta = j.value("delta", cfg.delta);
    cfg.a = j.value("a", cfg.a);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.ml = j.value("ml", cfg.ml);
    cfg.flip = j.value("flip", cfg.flip);
    cfg.crop = j.value("crop", cfg.crop);
    cfg.rotate = j.value("rotate", cfg.rotate);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::uint64_t train_config_hash(const TrainConfig& cfg) {
  return fnv1a64(train_config_to_json(cfg).dump());
}

bool EpochStats::operator==(const EpochStats& other) const {
  const auto same = [](double x, double y) {
    return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
  };
  return epoch == other.epoch && same(lt, other.lt) && same(ce, other.ce) &&
         same(penalty, other.penalty) && same(val_f, other.val_f) &&
         same(val_mae, other.val_mae) && same(events_f, other.events_f) &&
         same(events_r, other.events_r);
}

void write_run_record_csv(std::ostream& out, const RunRecord& record) {
  out << "epoch,lt,ce,penalty,val_f,val_mae,events_f,events_r\n";
  for (const EpochStats& e : record.epochs) {
    out << e.epoch << ',' << format_g17(e.lt) << ',' << format_g17(e.ce) << ','
        << format_g17(e.penalty) << ',' << format_g17(e.val_f) << ','
        << format_g17(e.val_mae) << ',' << format_g17(e.events_f) << ','
        << format_g17(e.events_r) << '\n';
  }
  if (!out) throw IoError("failed writing run record");
}

nlohmann::json run_record_summary(const RunRecord& record, const TrainConfig& cfg) {
  nlohmann::json j;
  j["config"] = train_config_to_json(cfg);
  j["epochs_recorded"] = record.epochs.size();
  j["diverged"] = record.diverged;
  if (!record.epochs.empty()) {
    const EpochStats& last = record.epochs.back();
    j["final"] = {{"epoch", last.epoch}, {"lt", last.lt}, {"ce", last.ce},
                  {"penalty", last.penalty}};
    if (std::isfinite(last.val_f)) {
      j["final"]["val_f"] = last.val_f;
      j["final"]["val_mae"] = last.val_mae;
      const auto best = std::max_element(
          record.epochs.begin(), record.epochs.end(),
          [](const EpochStats& x, const EpochStats& y) { return x.val_f < y.val_f; });
      j["best_val_f"] = best->val_f;
      j["best_val_f_epoch"] = best->epoch;
    }
  }
  return j;
}

void Checkpoint::save(std::ostream& out) const {
  nlohmann::json header = {{"kind", "checkpoint"},
                           {"config", train_config_to_json(config)},
                           {"config_hash", config_hash},
                           {"step", step},
                           {"next_epoch", next_epoch},
                           {"has_forgetting", has_forgetting}};
  out << header.dump() << '\n';
  params.save(out);
  moment1.save(out);
  moment2.save(out);
  if (has_forgetting) forgetting.save(out);
  if (!out) throw IoError("failed writing checkpoint");
}

Checkpoint Checkpoint::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("missing checkpoint header");
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("kind", "") != "checkpoint") {
    throw IoError("malformed checkpoint header");
  }
  Checkpoint ckpt;
  try {
    ckpt.config = train_config_from_json(header.at("config"));
    ckpt.config_hash = header.at("config_hash").get<std::uint64_t>();
    ckpt.step = header.at("step").get<std::int64_t>();
    ckpt.next_epoch = header.at("next_epoch").get<int>();
    ckpt.has_forgetting = header.at("has_forgetting").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint carries an invalid config: ") + e.what());
  }
  if (ckpt.config_hash != train_config_hash(ckpt.config)) {
    throw IoError("checkpoint hash does not match its embedded config");
  }
  ckpt.params = ParameterSet::load(in);
  ckpt.moment1 = ParameterSet::load(in);
  ckpt.moment2 = ParameterSet::load(in);
  if (ckpt.has_forgetting) ckpt.forgetting = ForgettingState::load(in);
  return ckpt;
}

namespace {

// --- spatial augmentation -------------------------------------------------
// Each helper accepts (h,w) or (c,h,w) tensors and applies the identical
// transform, so the all-focus image, every slice, and the label stay aligned.

struct AugDraw {
  bool mirror = false;
  int quarter_turns = 0;
  int dy = kCropPad, dx = kCropPad;  // crop offsets into the padded frame
  bool shifted = false;
};

Tensor mirror_v(const Tensor& t) {
  Tensor out = t;
  const int w = t.dim(t.ndim() - 1);
  const std::int64_t rows = t.size() / w;
  for (std::int64_t r = 0; r < rows; ++r) {
    for (int x = 0; x < w / 2; ++x) {
      std::swap(out[r * w + x], out[r * w + (w - 1 - x)]);
    }
  }
  return out;
}

Tensor quarter_turn(const Tensor& t) {  // 90 degrees counterclockwise, square
  const int w = t.dim(t.ndim() - 1);
  const int h = t.dim(t.ndim() - 2);
  Tensor out = t;  // square: same shape
  const std::int64_t planes = t.size() / (static_cast<std::int64_t>(h) * w);
  for (std::int64_t p = 0; p < planes; ++p) {
    const std::int64_t base = p * h * w;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out[base + static_cast<std::int64_t>(w - 1 - x) * w + y] = t[base + y * w + x];
      }
    }
  }
  return out;
}

int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

Tensor shift_reflect(const Tensor& t, int dy, int dx) {
  const int w = t.dim(t.ndim() - 1);
  const int h = t.dim(t.ndim() - 2);
  Tensor out = t;
  const std::int64_t planes = t.size() / (static_cast<std::int64_t>(h) * w);
  for (std::int64_t p = 0; p < planes; ++p) {
    const std::int64_t base = p * h * w;
    for (int y = 0; y < h; ++y) {
      const int sy = reflect_index(y + dy - kCropPad, h);
      for (int x = 0; x < w; ++x) {
        const int sx = reflect_index(x + dx - kCropPad, w);
        out[base + y * w + x] = t[base + sy * w + sx];
      }
    }
  }
  return out;
}

Tensor apply_aug(const Tensor& t, const AugDraw& d) {
  Tensor out = t;
  if (d.mirror) out = mirror_v(out);
  for (int q = 0; q < d.quarter_turns; ++q) out = quarter_turn(out);
  if (d.shifted && (d.dy != kCropPad || d.dx != kCropPad)) {
    out = shift_reflect(out, d.dy, d.dx);
  }
  return out;
}

// One training sample as presented this epoch.
struct EpochItem {
  const TrainView* view = nullptr;
  Tensor af;
  std::vector<Tensor> slices;
  Tensor label;
};

EpochItem materialize(const TrainView& view, const TrainConfig& cfg, Rng& rng) {
  EpochItem item;
  item.view = &view;
  AugDraw d;
  if (cfg.flip) d.mirror = rng.bernoulli(0.5);
  if (cfg.rotate) d.quarter_turns = static_cast<int>(rng.index(4));
  if (cfg.crop) {
    d.dy = static_cast<int>(rng.index(2 * kCropPad + 1));
    d.dx = static_cast<int>(rng.index(2 * kCropPad + 1));
    d.shifted = true;
  }
  item.af = apply_aug(view.allfocus, d);
  item.slices.reserve(view.slices.size());
  for (const Tensor& s : view.slices) item.slices.push_back(apply_aug(s, d));
  item.label = apply_aug(view.noisy, d);
  return item;
}

double sum_or_zero(const ForgettingState& state, const std::string& id, bool focal) {
  if (!state.contains(id)) return 0.0;
  return focal ? state.at(id).g_f.sum() : state.at(id).g_r.sum();
}

}  // namespace

RunRecord train(const std::vector<FocalStackSample>& train_set,
                const std::vector<FocalStackSample>& eval_set, const TrainConfig& cfg,
                Checkpoint* final, const Checkpoint* resume,
                const std::function<void(const Checkpoint&)>& on_epoch) {
  cfg.validate();
  const NetConfig net_cfg = cfg.effective_net();
  const VariantSwitches sw = variant_switches(cfg.variant);
  const std::size_t minimum = static_cast<std::size_t>(std::max(cfg.ml, cfg.batch));
  if (train_set.size() < minimum) {
    throw ConfigError("training corpus has " + std::to_string(train_set.size()) +
                      " samples; need at least max(ml, batch) = " +
                      std::to_string(minimum));
  }

  check_corpus_compatible(train_set, net_cfg);
  const int h = train_set.front().noisy.dim(0);
  const int w = train_set.front().noisy.dim(1);
  for (const auto& s : eval_set) {
    if (static_cast<int>(s.slices.size()) != net_cfg.k) {
      throw ConfigError("eval sample '" + s.id + "' has " +
                        std::to_string(s.slices.size()) +
                        " focal slices but the network expects " +
                        std::to_string(net_cfg.k));
    }
  }
  if (cfg.rotate && h != w) {
    throw ConfigError("quarter-turn augmentation needs square samples, got " +
                      std::to_string(h) + "x" + std::to_string(w));
  }

  const Network net(net_cfg);
  const std::uint64_t expected_hash = train_config_hash(cfg);

  ParameterSet params;
  ParameterSet moment1, moment2;
  std::int64_t step = 0;
  int start_epoch = 0;
  ForgettingState forgetting{ForgettingConfig{cfg.delta, cfg.a}};
  if (resume != nullptr) {
    if (resume->config_hash != expected_hash) {
      throw StateError(
          "checkpoint was produced by a different configuration (hash mismatch); "
          "resuming would silently change the run");
    }
    params = resume->params;
    moment1 = resume->moment1;
    moment2 = resume->moment2;
    step = resume->step;
    start_epoch = resume->next_epoch;
    if (resume->has_forgetting) forgetting = resume->forgetting;
  } else {
    params = net.init_params(cfg.seed);
    for (const auto& [name, t] : params) {
      moment1.insert(name, Tensor::zeros(t.shape()));
      moment2.insert(name, Tensor::zeros(t.shape()));
    }
  }
  const std::vector<std::string> names = params.names();

  // The training loop sees the corpus only through these views: the clean
  // masks are structurally out of reach.
  std::vector<TrainView> views;
  views.reserve(train_set.size());
  for (const auto& s : train_set) views.push_back(train_view(s));

  const double pixels = static_cast<double>(h) * w;
  const bool draw_pairs = sw.peer_penalty && cfg.alpha > 0.0;
  const Tensor unit_conf = Tensor::ones({h, w});

  RunRecord record;
  auto snapshot = [&](int next_epoch) {
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.config_hash = expected_hash;
    ckpt.step = step;
    ckpt.next_epoch = next_epoch;
    ckpt.params = params;
    ckpt.moment1 = moment1;
    ckpt.moment2 = moment2;
    ckpt.has_forgetting = sw.forgetting_guided;
    if (sw.forgetting_guided) ckpt.forgetting = forgetting;
    return ckpt;
  };

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(views.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    // Consecutive chunks of `batch`; a short tail merges into the previous
    // chunk so every sample is visited exactly once per epoch and every
    // batch can still seat a peer group (pair drawing needs three members).
    const int min_batch = draw_pairs ? std::max(cfg.ml, 3) : cfg.ml;
    std::vector<std::pair<int, int>> batches;  // [first, last)
    const int n = static_cast<int>(order.size());
    for (int first = 0; first < n; first += cfg.batch) {
      batches.emplace_back(first, std::min(first + cfg.batch, n));
    }
    if (batches.size() > 1 && batches.back().second - batches.back().first < min_batch) {
      batches[batches.size() - 2].second = n;
      batches.pop_back();
    }

    double sum_lt = 0.0, sum_ce = 0.0, sum_pen = 0.0;
    double events_f = 0.0, events_r = 0.0;
    bool diverged = false;

    for (const auto& [first, last] : batches) {
      const int bsize = last - first;
      std::vector<EpochItem> items;
      items.reserve(static_cast<std::size_t>(bsize));
      for (int i = first; i < last; ++i) {
        items.push_back(materialize(views[static_cast<std::size_t>(order[i])], cfg, rng));
      }

      Tape tape;
      const auto pv = Network::bind(tape, params);
      struct MemberOut {
        Var s_i, s_f, s_r;  // flattened to (h,w)
      };
      std::vector<MemberOut> outs;
      outs.reserve(items.size());
      for (const EpochItem& item : items) {
        const Tensor* conf_f = nullptr;
        const Tensor* conf_r = nullptr;
        Tensor m_f, m_r;
        if (sw.forgetting_guided && forgetting.contains(item.view->id)) {
          m_f = forgetting.weight_f(item.view->id);
          m_r = forgetting.weight_r(item.view->id);
          conf_f = &m_f;
          conf_r = &m_r;
        } else if (sw.forgetting_guided) {
          conf_f = &unit_conf;
          conf_r = &unit_conf;
        }
        const NetOutputs out = net.forward(tape, item.af, item.slices, pv, conf_f, conf_r);
        outs.push_back({tape.reshape(out.s_i, {h, w}), tape.reshape(out.s_f, {h, w}),
                        tape.reshape(out.s_r, {h, w})});
      }

      Var batch_loss;
      for (int a = 0; a < bsize; ++a) {
        std::vector<CrossPair> pairs;
        if (draw_pairs) pairs = draw_cross_pairs(bsize, a, cfg.ml, rng);
        const Var anchor[3] = {outs[static_cast<std::size_t>(a)].s_i,
                               outs[static_cast<std::size_t>(a)].s_f,
                               outs[static_cast<std::size_t>(a)].s_r};
        for (int t = 0; t < 3; ++t) {
          std::vector<Var> cross_preds;
          std::vector<Tensor> cross_labels;
          cross_preds.reserve(pairs.size());
          cross_labels.reserve(pairs.size());
          for (const CrossPair& p : pairs) {
            const auto& peer = outs[static_cast<std::size_t>(p.pred)];
            cross_preds.push_back(t == 0 ? peer.s_i : t == 1 ? peer.s_f : peer.s_r);
            cross_labels.push_back(items[static_cast<std::size_t>(p.label)].label);
          }
          const Var lt = penalty_loss(tape, anchor[t],
                                      items[static_cast<std::size_t>(a)].label,
                                      cross_preds, cross_labels, cfg.alpha);
          const double lt_v = tape.value(lt)[0];
          const double ce_v = cross_entropy_sum(
              tape.value(anchor[t]), items[static_cast<std::size_t>(a)].label);
          sum_lt += lt_v;
          sum_ce += ce_v;
          sum_pen += lt_v - ce_v;
          batch_loss = batch_loss.valid() ? tape.add(batch_loss, lt) : lt;
        }
      }
      batch_loss = tape.scale(batch_loss, 1.0 / (3.0 * bsize * pixels));
      if (!std::isfinite(tape.value(batch_loss)[0])) {
        diverged = true;
        break;
      }
      tape.backward(batch_loss);

      ++step;
      const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      bool finite = true;
      for (const std::string& name : names) {
        const Tensor& g = tape.grad(pv.at(name));
        if (!g.empty() && !g.all_finite()) {
          finite = false;
          break;
        }
        Tensor& theta = params.at(name);
        Tensor& m = moment1.at(name);
        Tensor& v = moment2.at(name);
        for (std::int64_t i = 0; i < theta.size(); ++i) {
          const double gi = g.empty() ? 0.0 : g[i];
          m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
          v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
          theta[i] -= cfg.lr * (m[i] / corr1) / (std::sqrt(v[i] / corr2) + kAdamEps);
        }
      }
      if (!finite) {
        diverged = true;
        break;
      }

      if (sw.forgetting_guided) {
        for (std::size_t i = 0; i < items.size(); ++i) {
          const std::string& id = items[i].view->id;
          const double pre_f = sum_or_zero(forgetting, id, true);
          const double pre_r = sum_or_zero(forgetting, id, false);
          forgetting.update(id, tape.value(outs[i].s_f), tape.value(outs[i].s_r),
                            items[i].label, epoch);
          events_f += sum_or_zero(forgetting, id, true) - pre_f;
          events_r += sum_or_zero(forgetting, id, false) - pre_r;
        }
      }
    }

    if (diverged) {
      record.diverged = true;
      break;
    }

    EpochStats stats;
    stats.epoch = epoch;
    const double denom = 3.0 * static_cast<double>(views.size()) * pixels;
    stats.lt = sum_lt / denom;
    stats.ce = sum_ce / denom;
    stats.penalty = sum_pen / denom;
    stats.events_f = events_f;
    stats.events_r = events_r;
    if (eval_set.empty()) {
      stats.val_f = std::nan("");
      stats.val_mae = std::nan("");
    } else {
      const MetricReport report = evaluate_corpus(params, cfg, eval_set);
      stats.val_f = report.mean_f;
      stats.val_mae = report.mean_mae;
    }
    record.epochs.push_back(stats);
    if (on_epoch) on_epoch(snapshot(epoch + 1));
  }

  // On divergence the mid-epoch parameter state is not a resumable point;
  // the last checkpoint delivered through on_epoch is the surviving state.
  if (final != nullptr && !record.diverged) *final = snapshot(cfg.epochs);
  return record;
}

void check_corpus_compatible(const std::vector<FocalStackSample>& corpus,
                             const NetConfig& net) {
  if (corpus.empty()) throw ConfigError("corpus is empty");
  const int h = corpus.front().noisy.dim(0);
  const int w = corpus.front().noisy.dim(1);
  for (const FocalStackSample& s : corpus) {
    if (static_cast<int>(s.slices.size()) != net.k) {
      throw ConfigError("sample '" + s.id + "' has " + std::to_string(s.slices.size()) +
                        " focal slices but the network expects " + std::to_string(net.k));
    }
    if (s.noisy.dim(0) != h || s.noisy.dim(1) != w) {
      throw ShapeError("sample '" + s.id + "' resolution " + s.noisy.shape_string() +
                       " differs from the corpus resolution " + std::to_string(h) +
                       "x" + std::to_string(w));
    }
  }
  const int stride = 1 << net.levels;
  if (h % stride != 0 || w % stride != 0) {
    throw ConfigError("corpus resolution " + std::to_string(h) + "x" +
                      std::to_string(w) + " is not divisible by the network's " +
                      std::to_string(stride) + "-pixel stride");
  }
}

MetricReport evaluate_corpus(const ParameterSet& params, const TrainConfig& cfg,
                             const std::vector<FocalStackSample>& corpus,
                             std::vector<Tensor>* maps) {
  cfg.validate();
  const NetConfig net_cfg = cfg.effective_net();
  check_corpus_compatible(corpus, net_cfg);
  const Network net(net_cfg);
  MetricReport report;
  for (const FocalStackSample& s : corpus) {
    Tape tape;
    const auto pv = Network::bind(tape, params);
    const NetOutputs out = net.forward(tape, s.allfocus, s.slices, pv);
    const Tensor pred =
        tape.value(tape.reshape(out.s_i, {s.clean.dim(0), s.clean.dim(1)}));
    report.add(s.id, f_measure(pred, s.clean), mae(pred, s.clean));
    if (maps != nullptr) maps->push_back(pred);
  }
  report.finalize();
  return report;
}

}  // namespace lfsal
