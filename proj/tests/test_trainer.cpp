#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lfsal/error.hpp"
#include "lfsal/synth.hpp"
#include "lfsal/trainer.hpp"

using lfsal::Checkpoint;
using lfsal::EpochStats;
using lfsal::FocalStackSample;
using lfsal::NetConfig;
using lfsal::Network;
using lfsal::RunRecord;
using lfsal::Tensor;
using lfsal::train;
using lfsal::train_config_from_json;
using lfsal::train_config_hash;
using lfsal::train_config_to_json;
using lfsal::TrainConfig;
using lfsal::Variant;
using lfsal::variant_from_name;
using lfsal::variant_name;
using lfsal::variant_switches;

namespace {

// Small rendered corpus: 16x16 scenes with 2 focal slices.
std::vector<FocalStackSample> tiny_corpus(int count, std::uint64_t seed) {
  lfsal::SceneSpec scene;
  scene.height = 16;
  scene.width = 16;
  lfsal::NoiseSpec noise;
  noise.morph_radius = 1;
  std::vector<FocalStackSample> out;
  for (int i = 0; i < count; ++i) {
    const auto render = lfsal::render_scene(scene, seed + static_cast<std::uint64_t>(i));
    FocalStackSample s;
    char id[16];
    std::snprintf(id, sizeof(id), "s%02d", i);
    s.id = id;
    s.allfocus = render.allfocus;
    s.slices = lfsal::render_focal_stack(render.allfocus, render.depth, 2, 2.0);
    s.clean = render.clean;
    s.noisy = lfsal::corrupt_label(render.clean, noise,
                                   seed + 100 + static_cast<std::uint64_t>(i));
    out.push_back(std::move(s));
  }
  return out;
}

TrainConfig tiny_config(Variant v) {
  TrainConfig cfg;
  cfg.variant = v;
  cfg.net.k = 2;
  cfg.net.levels = 2;
  cfg.net.widths = {2, 3};
  cfg.epochs = 2;
  cfg.batch = 4;
  cfg.ml = 2;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("variant names and switches") {
  for (Variant v : {Variant::baseline, Variant::mffo, Variant::pfm, Variant::ploss,
                    Variant::full}) {
    CHECK(variant_from_name(variant_name(v)) == v);
  }
  CHECK_THROWS_AS(variant_from_name("mffo+pfm"), lfsal::ConfigError);

  const auto base = variant_switches(Variant::baseline);
  CHECK_FALSE(base.mutual_fusion);
  CHECK_FALSE(base.forgetting_guided);
  CHECK_FALSE(base.peer_penalty);
  CHECK(variant_switches(Variant::mffo).mutual_fusion);
  CHECK_FALSE(variant_switches(Variant::mffo).forgetting_guided);
  CHECK(variant_switches(Variant::pfm).forgetting_guided);
  CHECK_FALSE(variant_switches(Variant::pfm).peer_penalty);
  CHECK(variant_switches(Variant::ploss).peer_penalty);
  CHECK_FALSE(variant_switches(Variant::ploss).mutual_fusion);
  const auto full = variant_switches(Variant::full);
  CHECK(full.mutual_fusion);
  CHECK(full.forgetting_guided);
  CHECK(full.peer_penalty);

  CHECK_FALSE(tiny_config(Variant::baseline).effective_net().mutual_fusion);
  CHECK(tiny_config(Variant::full).effective_net().mutual_fusion);
}

TEST_CASE("config validation rejects out-of-range fields") {
  CHECK_NOTHROW(tiny_config(Variant::full).validate());

  auto bad = tiny_config(Variant::full);
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), lfsal::ConfigError);
  bad = tiny_config(Variant::full);
  bad.ml = 1;
  CHECK_THROWS_AS(bad.validate(), lfsal::ConfigError);
  bad = tiny_config(Variant::full);
  bad.batch = 3;
  bad.ml = 4;  // batch < ml
  CHECK_THROWS_AS(bad.validate(), lfsal::ConfigError);
  bad = tiny_config(Variant::full);
  bad.delta = 1.0;
  CHECK_THROWS_AS(bad.validate(), lfsal::ConfigError);
  bad = tiny_config(Variant::full);
  bad.a = 0.0;
  CHECK_THROWS_AS(bad.validate(), lfsal::ConfigError);
  bad = tiny_config(Variant::full);
  bad.alpha = -0.1;
  CHECK_THROWS_AS(bad.validate(), lfsal::ConfigError);
  bad = tiny_config(Variant::full);
  bad.lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), lfsal::ConfigError);

  // Cross-scene penalty pairs need a third batch member.
  bad = tiny_config(Variant::ploss);
  bad.batch = 2;
  bad.ml = 2;
  CHECK_THROWS_AS(bad.validate(), lfsal::ConfigError);

  // Spatial augmentation conflicts with per-pixel forgetting identity.
  bad = tiny_config(Variant::pfm);
  bad.flip = true;
  CHECK_THROWS_AS(bad.validate(), lfsal::ConfigError);
  bad = tiny_config(Variant::full);
  bad.crop = true;
  CHECK_THROWS_AS(bad.validate(), lfsal::ConfigError);
  auto ok = tiny_config(Variant::mffo);
  ok.flip = ok.crop = ok.rotate = true;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("config json round trip and hashing") {
  TrainConfig cfg = tiny_config(Variant::ploss);
  cfg.epochs = 5;
  cfg.lr = 0.01;
  cfg.batch = 6;
  cfg.ml = 3;
  cfg.alpha = 0.1;
  cfg.delta = 0.25;
  cfg.a = 0.05;
  cfg.flip = true;

  const auto j = train_config_to_json(cfg);
  const TrainConfig back = train_config_from_json(j);
  CHECK(train_config_to_json(back) == j);
  CHECK(train_config_hash(back) == train_config_hash(cfg));

  TrainConfig other = cfg;
  other.delta = 0.3;
  CHECK(train_config_hash(other) != train_config_hash(cfg));

  auto unknown = j;
  unknown["learning_rate"] = 0.1;
  CHECK_THROWS_AS(train_config_from_json(unknown), lfsal::ConfigError);

  auto invalid = j;
  invalid["epochs"] = 0;
  CHECK_THROWS_AS(train_config_from_json(invalid), lfsal::ConfigError);
}

TEST_CASE("checkpoint io: byte-identical rewrite and malformed input") {
  const TrainConfig cfg = tiny_config(Variant::pfm);
  const Network net(cfg.effective_net());
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.config_hash = train_config_hash(cfg);
  ckpt.step = 12;
  ckpt.next_epoch = 3;
  ckpt.params = net.init_params(5);
  for (const auto& [name, t] : ckpt.params) {
    ckpt.moment1.insert(name, Tensor::zeros(t.shape()));
    ckpt.moment2.insert(name, Tensor::full(t.shape(), 0.5));
  }
  ckpt.has_forgetting = true;
  ckpt.forgetting = lfsal::ForgettingState({0.3, 0.04});
  ckpt.forgetting.update("s00", Tensor::full({4, 4}, 0.9), Tensor::full({4, 4}, 0.1),
                         Tensor::ones({4, 4}), 0);

  std::stringstream first;
  ckpt.save(first);
  std::stringstream second;
  const Checkpoint loaded = Checkpoint::load(first);
  loaded.save(second);
  CHECK(first.str() == second.str());
  CHECK(loaded.step == 12);
  CHECK(loaded.next_epoch == 3);
  CHECK(lfsal::train_config_to_json(loaded.config) == lfsal::train_config_to_json(cfg));
  CHECK(loaded.params == ckpt.params);
  CHECK(loaded.moment2 == ckpt.moment2);
  CHECK(loaded.has_forgetting);
  CHECK(loaded.forgetting.contains("s00"));

  std::stringstream garbage("not a checkpoint\n");
  CHECK_THROWS_AS(Checkpoint::load(garbage), lfsal::IoError);
  std::stringstream truncated(first.str().substr(0, first.str().size() / 2));
  CHECK_THROWS_AS(Checkpoint::load(truncated), lfsal::IoError);
}

TEST_CASE("train: determinism and consecutive epoch records") {
  const auto corpus = tiny_corpus(6, 11);
  const auto eval = tiny_corpus(2, 99);
  const TrainConfig cfg = tiny_config(Variant::full);

  const RunRecord a = train(corpus, eval, cfg);
  const RunRecord b = train(corpus, eval, cfg);
  CHECK(a == b);
  REQUIRE(a.epochs.size() == 2);
  CHECK_FALSE(a.diverged);
  for (std::size_t i = 0; i < a.epochs.size(); ++i) {
    CHECK(a.epochs[i].epoch == static_cast<int>(i));
    CHECK(std::isfinite(a.epochs[i].lt));
    CHECK(a.epochs[i].val_f >= 0.0);
    CHECK(a.epochs[i].val_f <= 1.0);
    CHECK(a.epochs[i].val_mae >= 0.0);
    CHECK(a.epochs[i].val_mae <= 1.0);
  }

  std::ostringstream csv_a, csv_b;
  lfsal::write_run_record_csv(csv_a, a);
  lfsal::write_run_record_csv(csv_b, b);
  CHECK(csv_a.str() == csv_b.str());
}

TEST_CASE("train: zero learning rate leaves parameters at their init") {
  const auto corpus = tiny_corpus(7, 13);
  TrainConfig cfg = tiny_config(Variant::full);
  cfg.epochs = 1;
  cfg.lr = 0.0;
  Checkpoint final;
  train(corpus, {}, cfg, &final);
  const Network net(cfg.effective_net());
  CHECK(final.params == net.init_params(cfg.seed));
  CHECK(final.step == 2);  // 7 samples / batch 4 -> chunks of 4 and 3
}

TEST_CASE("train: alpha 0 collapses the loss to its cross-entropy term") {
  const auto corpus = tiny_corpus(6, 17);
  TrainConfig cfg = tiny_config(Variant::full);
  cfg.alpha = 0.0;
  const RunRecord rec = train(corpus, {}, cfg);
  for (const EpochStats& e : rec.epochs) {
    CHECK(e.lt == e.ce);        // bit-identical reduction
    CHECK(e.penalty == 0.0);    // exactly, not approximately
    CHECK(std::isnan(e.val_f)); // no validation set supplied
  }
}

TEST_CASE("train: forgetting state exists exactly for the tracking variants") {
  const auto corpus = tiny_corpus(6, 19);
  for (Variant v : {Variant::baseline, Variant::mffo, Variant::ploss}) {
    Checkpoint final;
    const RunRecord rec = train(corpus, {}, tiny_config(v), &final);
    CHECK_FALSE(final.has_forgetting);
    CHECK(final.forgetting.size() == 0);
    for (const EpochStats& e : rec.epochs) {
      CHECK(e.events_f == 0.0);
      CHECK(e.events_r == 0.0);
    }
  }
  for (Variant v : {Variant::pfm, Variant::full}) {
    Checkpoint final;
    const TrainConfig cfg = tiny_config(v);
    train(corpus, {}, cfg, &final);
    CHECK(final.has_forgetting);
    CHECK(final.forgetting.size() == corpus.size());
    for (const auto& s : corpus) {
      REQUIRE(final.forgetting.contains(s.id));
      // One update per sample per epoch: the last stamp is the last epoch.
      CHECK(final.forgetting.at(s.id).last_epoch == cfg.epochs - 1);
    }
  }
}

TEST_CASE("train: resume reproduces the uninterrupted run exactly") {
  const auto corpus = tiny_corpus(7, 23);  // exercises tail-batch folding too
  const auto eval = tiny_corpus(2, 101);
  TrainConfig cfg = tiny_config(Variant::full);
  cfg.epochs = 4;

  std::vector<Checkpoint> checkpoints;
  const RunRecord full_run =
      train(corpus, eval, cfg, nullptr, nullptr,
            [&](const Checkpoint& c) { checkpoints.push_back(c); });
  REQUIRE(full_run.epochs.size() == 4);
  REQUIRE(checkpoints.size() == 4);

  // Round-trip the epoch-2 checkpoint through its serialized form.
  std::stringstream buf;
  checkpoints[1].save(buf);
  const Checkpoint mid = Checkpoint::load(buf);
  CHECK(mid.next_epoch == 2);

  Checkpoint final;
  const RunRecord resumed = train(corpus, eval, cfg, &final, &mid);
  REQUIRE(resumed.epochs.size() == 2);
  CHECK(resumed.epochs[0] == full_run.epochs[2]);
  CHECK(resumed.epochs[1] == full_run.epochs[3]);
  CHECK(final.next_epoch == 4);

  // A different configuration must refuse the checkpoint.
  TrainConfig other = cfg;
  other.delta = 0.35;
  CHECK_THROWS_AS(train(corpus, eval, other, nullptr, &mid), lfsal::StateError);
}

TEST_CASE("train: non-finite loss aborts and leaves the last good state") {
  const auto corpus = tiny_corpus(6, 29);
  TrainConfig cfg = tiny_config(Variant::full);
  cfg.epochs = 1;
  Checkpoint final;
  train(corpus, {}, cfg, &final);

  Checkpoint poisoned = final;
  poisoned.params.at("fuse.w")[0] = std::nan("");
  poisoned.next_epoch = 0;
  cfg.epochs = 2;
  poisoned.config_hash = train_config_hash(cfg);

  Checkpoint survivor;
  survivor.config_hash = 123;  // sentinel: must remain untouched
  int delivered = 0;
  const RunRecord rec = train(corpus, {}, cfg, &survivor, &poisoned,
                              [&](const Checkpoint&) { ++delivered; });
  CHECK(rec.diverged);
  CHECK(rec.epochs.empty());
  CHECK(delivered == 0);
  CHECK(survivor.config_hash == 123);
}

TEST_CASE("train: corpus and config mismatches are refused up front") {
  const auto corpus = tiny_corpus(6, 31);
  TrainConfig cfg = tiny_config(Variant::full);

  CHECK_THROWS_AS(train(tiny_corpus(3, 31), {}, cfg), lfsal::ConfigError);

  TrainConfig wrong_k = cfg;
  wrong_k.net.k = 3;
  CHECK_THROWS_AS(train(corpus, {}, wrong_k), lfsal::ConfigError);

  auto mixed = corpus;
  mixed[2].noisy = Tensor::zeros({32, 32});
  CHECK_THROWS_AS(train(mixed, {}, cfg), lfsal::ShapeError);

  // Resolution must be divisible by the network's downsampling stride (4 for
  // two levels); 18x18 is not.
  std::vector<FocalStackSample> odd;
  for (int i = 0; i < 6; ++i) {
    FocalStackSample s;
    s.id = "odd" + std::to_string(i);
    s.allfocus = Tensor::zeros({1, 18, 18});
    s.slices = {Tensor::zeros({1, 18, 18}), Tensor::zeros({1, 18, 18})};
    s.noisy = Tensor::zeros({18, 18});
    s.clean = Tensor::zeros({18, 18});
    odd.push_back(std::move(s));
  }
  CHECK_THROWS_AS(train(odd, {}, cfg), lfsal::ConfigError);

  TrainConfig rot = tiny_config(Variant::mffo);
  rot.rotate = true;
  std::vector<FocalStackSample> wide;
  for (int i = 0; i < 6; ++i) {
    FocalStackSample s;
    s.id = "wide" + std::to_string(i);
    s.allfocus = Tensor::zeros({1, 16, 32});
    s.slices = {Tensor::zeros({1, 16, 32}), Tensor::zeros({1, 16, 32})};
    s.noisy = Tensor::zeros({16, 32});
    s.clean = Tensor::zeros({16, 32});
    wide.push_back(std::move(s));
  }
  CHECK_THROWS_AS(train(wide, {}, rot), lfsal::ConfigError);
}

TEST_CASE("train: augmented runs stay deterministic") {
  const auto corpus = tiny_corpus(6, 37);
  TrainConfig cfg = tiny_config(Variant::mffo);
  cfg.flip = true;
  cfg.rotate = true;
  cfg.crop = true;
  const RunRecord a = train(corpus, {}, cfg);
  const RunRecord b = train(corpus, {}, cfg);
  CHECK(a == b);
  CHECK_FALSE(a.diverged);
  REQUIRE(a.epochs.size() == 2);
  // Augmentation changes the presented pixels, so the loss differs from the
  // unaugmented run.
  TrainConfig plain = cfg;
  plain.flip = plain.rotate = plain.crop = false;
  const RunRecord c = train(corpus, {}, plain);
  CHECK(a.epochs[0].lt != c.epochs[0].lt);
}

TEST_CASE("train: loss trends down over a few epochs") {
  const auto corpus = tiny_corpus(8, 41);
  TrainConfig cfg = tiny_config(Variant::full);
  cfg.epochs = 4;
  const RunRecord rec = train(corpus, {}, cfg);
  REQUIRE(rec.epochs.size() == 4);
  CHECK(rec.epochs.back().lt < rec.epochs.front().lt);
}

TEST_CASE("run record csv and summary formatting") {
  RunRecord rec;
  rec.epochs.push_back({0, 0.5, 0.5, 0.0, 0.25, 0.125, 3.0, 4.0});
  rec.epochs.push_back({1, 0.25, 0.2, 0.05, 0.5, 0.0625, 1.0, 0.0});
  std::ostringstream out;
  lfsal::write_run_record_csv(out, rec);
  CHECK(out.str() ==
        "epoch,lt,ce,penalty,val_f,val_mae,events_f,events_r\n"
        "0,0.5,0.5,0,0.25,0.125,3,4\n"
        "1,0.25,0.20000000000000001,0.050000000000000003,0.5,0.0625,1,0\n");

  const TrainConfig cfg = tiny_config(Variant::full);
  const auto summary = lfsal::run_record_summary(rec, cfg);
  CHECK(summary["epochs_recorded"] == 2);
  CHECK(summary["diverged"] == false);
  CHECK(summary["best_val_f"] == 0.5);
  CHECK(summary["best_val_f_epoch"] == 1);
  CHECK(summary["final"]["epoch"] == 1);
  CHECK(summary["config"]["variant"] == "full");
}

}  // TEST_SUITE
