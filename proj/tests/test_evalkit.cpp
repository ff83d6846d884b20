#include "lfsal/evalkit.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "lfsal/error.hpp"
#include "lfsal/image.hpp"
#include "lfsal/rng.hpp"
#include "lfsal/synth.hpp"
#include "testutil.hpp"

using lfsal::cross_scene_correlation;
using lfsal::f_measure;
using lfsal::FocalStackSample;
using lfsal::ForgettingConfig;
using lfsal::ForgettingState;
using lfsal::mae;
using lfsal::MetricReport;
using lfsal::Rng;
using lfsal::Tensor;

namespace {

Tensor rand_map(Rng& rng, int h, int w, double lo = 0.0, double hi = 1.0) {
  Tensor t({h, w});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Copy of the label with the listed pixels pushed to the other class, i.e.
// outside any agreement margin below 1.
Tensor with_flipped(const Tensor& label, const std::vector<std::pair<int, int>>& flips) {
  Tensor s = label;
  for (const auto& [r, c] : flips) s.at(r, c) = 1.0 - s.at(r, c);
  return s;
}

}  // namespace

TEST_SUITE("evalkit") {

TEST_CASE("f-measure: exact agreement, degenerate masks, half coverage") {
  Tensor y = Tensor::zeros({4, 4});
  for (int c = 0; c < 4; ++c) {
    y.at(0, c) = 1.0;
    y.at(1, c) = 1.0;
  }

  // Self-agreement needs the object under half the image: at exactly half the
  // adaptive threshold saturates to 1 and the strict binarization empties the
  // prediction (the same strictness that makes an all-zero map score 0).
  Tensor small = Tensor::zeros({4, 4});
  for (int c = 0; c < 4; ++c) small.at(0, c) = 1.0;
  CHECK(f_measure(small, small) == 1.0);
  CHECK(f_measure(Tensor::zeros({4, 4}), y) == 0.0);        // empty prediction
  CHECK(f_measure(Tensor::zeros({4, 4}), Tensor::zeros({4, 4})) == 1.0);

  Tensor lone = Tensor::zeros({4, 4});
  lone.at(0, 0) = 1.0;  // binarizes non-empty against an empty mask
  CHECK(f_measure(lone, Tensor::zeros({4, 4})) == 0.0);

  // Prediction covering exactly half the mask and nothing else:
  // P = 1, R = 0.5 -> F = 1.3 * 0.5 / 0.8 = 0.8125.
  Tensor s = Tensor::zeros({4, 4});
  for (int c = 0; c < 4; ++c) s.at(0, c) = 1.0;
  CHECK(f_measure(s, y) == doctest::Approx(0.8125).epsilon(1e-12));
}

TEST_CASE("f-measure and mae stay within the unit interval") {
  Rng rng(3);
  for (int trial = 0; trial < 25; ++trial) {
    const Tensor s = rand_map(rng, 8, 8);
    Tensor y(std::vector<int>{8, 8});
    for (std::int64_t i = 0; i < y.size(); ++i) y[i] = rng.uniform(0.0, 1.0) < 0.4;
    const double f = f_measure(s, y);
    const double m = mae(s, y);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    CHECK(m >= 0.0);
    CHECK(m <= 1.0);
  }
}

TEST_CASE("mae: exact values and complement symmetry") {
  const Tensor zero = Tensor::zeros({3, 5});
  CHECK(mae(zero, zero) == 0.0);
  CHECK(mae(Tensor::ones({3, 5}), zero) == 1.0);
  CHECK(mae(Tensor::full({3, 5}, 0.25), zero) == 0.25);

  Rng rng(9);
  const Tensor s = rand_map(rng, 6, 7);
  const Tensor y = rand_map(rng, 6, 7);
  Tensor s_c = s, y_c = y;
  for (std::int64_t i = 0; i < s.size(); ++i) {
    s_c[i] = 1.0 - s[i];
    y_c[i] = 1.0 - y[i];
  }
  CHECK(mae(s, y) == mae(s_c, y_c));  // |s-y| is invariant pixel by pixel
}

TEST_CASE("metric report: corpus means, csv bytes, json summary") {
  MetricReport rep;
  rep.add("a", 0.5, 0.25);
  rep.add("b", 1.0, 0.0);
  rep.finalize();
  CHECK(rep.count == 2);
  CHECK(rep.mean_f == 0.75);
  CHECK(rep.mean_mae == 0.125);

  std::ostringstream csv;
  lfsal::write_metric_csv(csv, rep);
  CHECK(csv.str() ==
        "id,f_measure,mae\n"
        "a,0.5,0.25\n"
        "b,1,0\n"
        "mean,0.75,0.125\n");

  const nlohmann::json j = lfsal::metric_report_to_json(rep);
  CHECK(j.at("count") == 2);
  CHECK(j.at("mean_f") == 0.75);
  CHECK(j.at("mean_mae") == 0.125);
  CHECK(j.at("beta2") == 0.3);

  MetricReport empty;
  empty.finalize();
  CHECK(empty.count == 0);
  CHECK(empty.mean_f == 0.0);
}

// Builds a 4x4 scene with two mislabeled pixels and drives ten epochs of
// scripted agreement so every statistic below is hand-checkable:
//   (0,0) mislabeled, agrees on even epochs  -> 5 forgetting events
//   (1,1) mislabeled, never agrees           -> never learned
//   (3,3) correct,    agrees on even epochs  -> 5 forgetting events
//   (2,2) correct,    first agrees at epoch 3
//   all other pixels always agree.
static FocalStackSample scripted_sample(ForgettingState& state) {
  Tensor clean = Tensor::zeros({4, 4});
  for (int r = 1; r <= 2; ++r) {
    for (int c = 1; c <= 2; ++c) clean.at(r, c) = 1.0;
  }
  Tensor noisy = clean;
  noisy.at(0, 0) = 1.0;
  noisy.at(1, 1) = 0.0;

  for (int epoch = 0; epoch < 10; ++epoch) {
    std::vector<std::pair<int, int>> flips = {{1, 1}};
    if (epoch % 2 == 1) {
      flips.push_back({0, 0});
      flips.push_back({3, 3});
    }
    if (epoch < 3) flips.push_back({2, 2});
    const Tensor s = with_flipped(noisy, flips);
    state.update("a", s, s, noisy, epoch);
  }

  FocalStackSample sample;
  sample.id = "a";
  sample.allfocus = Tensor::zeros({1, 4, 4});
  sample.noisy = noisy;
  sample.clean = clean;
  return sample;
}

TEST_CASE("forgetting analysis: scripted run matches hand-counted statistics") {
  ForgettingState state(ForgettingConfig{});
  const FocalStackSample sample = scripted_sample(state);
  const auto rep = lfsal::forgetting_analysis(state, {sample}, 3);

  CHECK(rep.event_threshold == 3);
  CHECK(rep.last_epoch == 9);

  // Two mislabeled pixels and fourteen correct ones, two streams each.
  CHECK(rep.overall.noisy_count == 4);
  CHECK(rep.overall.clean_count == 28);
  CHECK(rep.overall.noisy_count + rep.overall.clean_count == 2 * 16);
  CHECK(rep.overall.applicable);
  CHECK(rep.overall.noisy_fraction == 0.5);         // (0,0) in both streams
  CHECK(rep.overall.clean_fraction == 2.0 / 28.0);  // (3,3) in both streams

  // The object's bounding box is rows 1..2 x cols 1..2; the eventful pixels
  // sit outside it.
  CHECK(rep.object_box.noisy_count == 2);
  CHECK(rep.object_box.clean_count == 6);
  CHECK(rep.object_box.applicable);
  CHECK(rep.object_box.noisy_fraction == 0.0);
  CHECK(rep.object_box.clean_fraction == 0.0);

  REQUIRE(rep.first_learn.noisy.size() == 10);
  REQUIRE(rep.first_learn.clean.size() == 10);
  CHECK(rep.first_learn.noisy[0] == 2);
  CHECK(rep.first_learn.noisy_never == 2);
  CHECK(rep.first_learn.clean[0] == 26);
  CHECK(rep.first_learn.clean[3] == 2);
  CHECK(rep.first_learn.clean_never == 0);
  CHECK(rep.first_learn.noisy_mean == 0.0);
  CHECK(rep.first_learn.clean_mean == 6.0 / 28.0);

  REQUIRE(rep.events_noisy.size() == 6);  // counts reach G = 5
  CHECK(rep.events_noisy[0] == 2);
  CHECK(rep.events_noisy[5] == 2);
  CHECK(rep.events_clean[0] == 26);
  CHECK(rep.events_clean[5] == 2);

  std::ostringstream events;
  lfsal::write_event_histogram_csv(events, rep);
  CHECK(events.str() ==
        "events,noisy,clean\n"
        "0,2,26\n"
        "1,0,0\n"
        "2,0,0\n"
        "3,0,0\n"
        "4,0,0\n"
        "5,2,2\n");

  std::ostringstream learn;
  lfsal::write_first_learn_csv(learn, rep);
  CHECK(learn.str() ==
        "epoch,noisy,clean\n"
        "0,2,26\n"
        "1,0,0\n"
        "2,0,0\n"
        "3,0,2\n"
        "4,0,0\n"
        "5,0,0\n"
        "6,0,0\n"
        "7,0,0\n"
        "8,0,0\n"
        "9,0,0\n"
        "-1,2,0\n");

  const nlohmann::json j = lfsal::forgetting_report_to_json(rep);
  CHECK(j.at("overall").at("noisy_fraction") == 0.5);
  CHECK(j.at("first_learn").at("clean_mean") == 6.0 / 28.0);
  CHECK(j.at("last_epoch") == 9);
}

TEST_CASE("forgetting analysis: missing logs, zero noise, and zero counts") {
  const ForgettingState empty;
  FocalStackSample sample;
  sample.id = "a";
  sample.noisy = Tensor::zeros({4, 4});
  sample.clean = Tensor::zeros({4, 4});
  CHECK_THROWS_AS(lfsal::forgetting_analysis(empty, {sample}, 3), lfsal::StateError);

  // A tracked corpus where one sample never hit the log is refused too.
  ForgettingState partial(ForgettingConfig{});
  partial.update("a", sample.noisy, sample.noisy, sample.noisy, 0);
  FocalStackSample other = sample;
  other.id = "b";
  CHECK_THROWS_AS(lfsal::forgetting_analysis(partial, {sample, other}, 3),
                  lfsal::StateError);

  // Zero-noise corpus: the noisy population is empty and the split is marked
  // not applicable; a run whose predictions always agreed has no events, so
  // every fraction is zero.
  Tensor clean = Tensor::zeros({4, 4});
  clean.at(1, 1) = 1.0;
  FocalStackSample agree;
  agree.id = "c";
  agree.noisy = clean;
  agree.clean = clean;
  ForgettingState calm(ForgettingConfig{});
  for (int epoch = 0; epoch < 4; ++epoch) calm.update("c", clean, clean, clean, epoch);
  const auto rep = lfsal::forgetting_analysis(calm, {agree}, 3);
  CHECK_FALSE(rep.overall.applicable);
  CHECK(rep.overall.noisy_count == 0);
  CHECK(rep.overall.clean_count == 32);
  CHECK(rep.overall.noisy_fraction == 0.0);
  CHECK(rep.overall.clean_fraction == 0.0);
  CHECK(rep.first_learn.noisy_never == 0);
  // No noisy observations were ever learned, so the mean is not a number and
  // serializes as null.
  CHECK(lfsal::forgetting_report_to_json(rep).at("first_learn").at("noisy_mean").is_null());
  CHECK(rep.events_clean[0] == 32);  // G == 0 everywhere
}

TEST_CASE("cross-scene correlation: hand-built scenes and skip accounting") {
  // Scene "a": a one-pixel object at (4,4) and two flips at distance 2.
  FocalStackSample a;
  a.id = "a";
  a.clean = Tensor::zeros({8, 8});
  a.clean.at(4, 4) = 1.0;
  a.noisy = a.clean;
  a.noisy.at(4, 6) = 1.0;
  a.noisy.at(6, 4) = 1.0;
  a.allfocus = Tensor::zeros({1, 8, 8});
  a.allfocus.at(0, 4, 6) = 0.25;
  a.allfocus.at(0, 6, 4) = 0.75;

  // Scene "b": labels agree everywhere.
  FocalStackSample b = a;
  b.id = "b";
  b.noisy = b.clean;

  // Scene "c": empty clean mask, so no centroid exists.
  FocalStackSample c = a;
  c.id = "c";
  c.clean = Tensor::zeros({8, 8});
  c.noisy = Tensor::zeros({8, 8});
  c.noisy.at(2, 2) = 1.0;

  const auto data = cross_scene_correlation({a, b, c});
  CHECK(data.skipped_no_noise == 1);
  CHECK(data.skipped_no_object == 1);
  REQUIRE(data.points.size() == 1);
  const auto& p = data.points[0];
  CHECK(p.id == "a");
  CHECK(p.noisy_pixels == 2);
  CHECK(p.mean_intensity == 0.5);
  const double expected_distance = 2.0 / std::hypot(8.0, 8.0);
  CHECK(p.mean_distance == expected_distance);

  std::ostringstream csv;
  lfsal::write_correlation_csv(csv, data);
  CHECK(csv.str() == "id,noisy_pixels,mean_intensity,mean_centroid_distance\n"
                     "a,2,0.5," + g17(expected_distance) + "\n");
}

TEST_CASE("cross-scene correlation: uniform flips match the uniform-pixel oracle") {
  lfsal::GenConfig cfg;
  cfg.k = 2;
  cfg.count = 4;
  cfg.noise.rate = 0.2;
  cfg.noise.morph_radius = 0;  // pure independent flips: noise is uniform in space
  const auto corpus = lfsal::generate_corpus(cfg, 515);

  const auto data = cross_scene_correlation(corpus);
  REQUIRE(data.points.size() == corpus.size());

  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& sample = corpus[i];
    const auto& point = data.points[i];
    CHECK(point.id == sample.id);

    // A uniformly placed noisy pixel has the grid-average distance from the
    // centroid and the grid-average intensity; each scene carries ~800 flips,
    // so the sample means sit well within these tolerances.
    const int h = sample.clean.dim(0), w = sample.clean.dim(1);
    double cr = 0.0, cc = 0.0;
    std::int64_t n = 0;
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        if (sample.clean.at(r, col) > 0.5) {
          cr += r;
          cc += col;
          ++n;
        }
      }
    }
    REQUIRE(n > 0);
    cr /= static_cast<double>(n);
    cc /= static_cast<double>(n);
    double grid_mean_distance = 0.0;
    for (int r = 0; r < h; ++r) {
      for (int col = 0; col < w; ++col) {
        grid_mean_distance += std::hypot(r - cr, col - cc);
      }
    }
    grid_mean_distance /= static_cast<double>(h) * w * std::hypot(h, w);

    CHECK(point.mean_distance == doctest::Approx(grid_mean_distance).epsilon(0.1));
    CHECK(point.mean_intensity ==
          doctest::Approx(sample.allfocus.mean()).epsilon(0.15));
  }
}

TEST_CASE("map rendering: exact quantization and round trip") {
  lfsal_test::TempDir tmp("render");
  const std::string path = (tmp.path() / "map.pgm").string();

  lfsal::render_map(Tensor::ones({3, 5}), path);
  Tensor back = lfsal::read_pgm(path);
  for (std::int64_t i = 0; i < back.size(); ++i) CHECK(back[i] == 1.0);

  lfsal::render_map(Tensor::full({3, 5}, 0.5), path);
  back = lfsal::read_pgm(path);
  for (std::int64_t i = 0; i < back.size(); ++i) {
    CHECK(back[i] == 128.0 / 255.0);  // 0.5*255 + 0.5 rounds up to 128
  }

  lfsal::render_map(Tensor::full({3, 5}, 0.3), path);
  back = lfsal::read_pgm(path);
  for (std::int64_t i = 0; i < back.size(); ++i) {
    CHECK(std::abs(back[i] - 0.3) <= 1.0 / 255.0);
  }
}

}  // TEST_SUITE
