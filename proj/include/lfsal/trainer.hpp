#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "lfsal/evalkit.hpp"
#include "lfsal/forgetting.hpp"
#include "lfsal/network.hpp"
#include "lfsal/params.hpp"
#include "lfsal/synth.hpp"

namespace lfsal {

// Ablation rows. Each named variant adds exactly one mechanism to the
// baseline (separate streams, plain concatenation fusion, plain cross
// entropy); `full` enables all three.
//   mffo  — mutual-fusion feature operations (channel attention, recurrent
//           refinement, pixel guidance)
//   pfm   — pixel-forgetting-guided fusion (event tracking + confidence maps)
//   ploss — cross-scene noise penalty on top of the cross entropy
enum class Variant { baseline, mffo, pfm, ploss, full };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // ConfigError on unknown

struct VariantSwitches {
  bool mutual_fusion = false;      // attention/recurrence/guidance stack
  bool forgetting_guided = false;  // event tracking + confidence-guided fusion
  bool peer_penalty = false;       // alpha > 0 cross-scene penalty terms
};
VariantSwitches variant_switches(Variant v);

struct TrainConfig {
  Variant variant = Variant::full;
  NetConfig net;           // mutual_fusion is derived from the variant
  int epochs = 30;
  double lr = 1e-3;        // desk-scale default; see notes in validate()
  double beta1 = 0.9;      // first-moment decay of the adaptive update
  double beta2 = 0.999;    // second-moment decay
  int batch = 8;
  std::uint64_t seed = 1;
  double delta = 0.3;      // agreement margin of the transformation matrix
  double a = 0.04;         // confidence-weight descent coefficient
  double alpha = 0.2;      // penalty strength
  int ml = 4;              // peer group size: ml - 1 cross pairs per anchor
  bool flip = false;       // mirror augmentation (identical across views)
  bool crop = false;       // reflect-pad-and-shift augmentation
  bool rotate = false;     // quarter-turn augmentation

  // The network the variant actually trains: `net` with mutual_fusion
  // replaced by the variant's switch.
  NetConfig effective_net() const;

  // epochs >= 1, batch >= ml >= 2, lr >= 0, delta in (0,1), a > 0,
  // alpha >= 0, and net.validate(). Spatial augmentation is rejected when
  // forgetting is tracked: event counting needs stable pixel identity.
  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON dump; checkpoints refuse to resume when it
// changes.
std::uint64_t train_config_hash(const TrainConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double lt = 0.0;        // mean per anchor/stream/pixel of the training loss
  double ce = 0.0;        // its cross-entropy component, same normalization
  double penalty = 0.0;   // lt - ce, exactly 0 when alpha = 0
  double val_f = 0.0;     // mean F-measure vs clean masks (nan without a set)
  double val_mae = 0.0;   // mean MAE vs clean masks (nan without a set)
  double events_f = 0.0;  // forgetting events fired this epoch, focal stream
  double events_r = 0.0;  // same, all-focus stream

  // Bitwise comparison (nan-safe): equality means "the runs logged identical
  // bytes", which is what the determinism contract promises.
  bool operator==(const EpochStats& other) const;
};

struct RunRecord {
  std::vector<EpochStats> epochs;  // consecutive; starts at the resume epoch
  bool diverged = false;           // non-finite loss aborted the run

  bool operator==(const RunRecord&) const = default;
};

// One CSV row per epoch, %.17g, stable column order; byte-identical across
// re-runs of the same config/seed.
void write_run_record_csv(std::ostream& out, const RunRecord& record);
nlohmann::json run_record_summary(const RunRecord& record, const TrainConfig& cfg);

// Everything needed to continue a run: parameters, both moment accumulators,
// the step counter, the next epoch to run, and (when tracked) the forgetting
// state. `config_hash` pins the producing configuration.
struct Checkpoint {
  TrainConfig config;             // the configuration that produced this state
  std::uint64_t config_hash = 0;  // train_config_hash(config), checked on load
  std::int64_t step = 0;          // optimizer updates applied so far
  int next_epoch = 0;
  ParameterSet params;
  ParameterSet moment1;
  ParameterSet moment2;
  bool has_forgetting = false;
  ForgettingState forgetting;

  void save(std::ostream& out) const;
  static Checkpoint load(std::istream& in);  // IoError on malformed input
};

// Runs the training loop. Deterministic in (corpus bytes, config): shuffling,
// pair sampling, and augmentation draw from per-epoch streams seeded by
// mix_seed(cfg.seed, epoch). The forgetting state is updated exactly once per
// sample per epoch from that epoch's stream predictions. `eval_set` may be
// empty (validation columns become nan). When `resume` is given its config
// hash must match (StateError otherwise) and the loop continues at
// resume->next_epoch. `on_epoch`, when set, receives the checkpoint after
// every epoch. On divergence the run aborts, `final` is left untouched, and
// the last checkpoint delivered through `on_epoch` is the surviving state;
// otherwise `final`, when set, receives the end state.
RunRecord train(const std::vector<FocalStackSample>& train_set,
                const std::vector<FocalStackSample>& eval_set,
                const TrainConfig& cfg, Checkpoint* final = nullptr,
                const Checkpoint* resume = nullptr,
                const std::function<void(const Checkpoint&)>& on_epoch = {});

// Architecture/corpus compatibility: every sample must carry the network's
// slice count and the corpus resolution, which must be divisible by the
// network's downsampling stride. ConfigError/ShapeError on violation.
void check_corpus_compatible(const std::vector<FocalStackSample>& corpus,
                             const NetConfig& net);

// Scores the initial fused prediction of every sample against its clean mask
// under unit confidence — the exact code path behind train()'s per-epoch
// validation columns, so evaluating a final checkpoint on the eval split
// reproduces the run record's last-epoch metrics bit for bit. When `maps` is
// non-null it receives one (h,w) saliency map per sample, in corpus order.
MetricReport evaluate_corpus(const ParameterSet& params, const TrainConfig& cfg,
                             const std::vector<FocalStackSample>& corpus,
                             std::vector<Tensor>* maps = nullptr);

}  // namespace lfsal
