#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "lfsal/forgetting.hpp"
#include "lfsal/synth.hpp"
#include "lfsal/tensor.hpp"

namespace lfsal {

// Saliency F-measure with adaptive binarization at min(2*mean(s), 1) and
// weighted precision/recall (beta2 defaults to the saliency convention 0.3).
// Degenerate cases: an empty prediction or empty mask scores 0, unless both
// are empty (perfect agreement on "nothing salient"), which scores 1.
double f_measure(const Tensor& s, const Tensor& y, double beta2 = 0.3);

// Mean absolute error on the continuous prediction (no binarization).
double mae(const Tensor& s, const Tensor& y);

// Per-sample metrics plus corpus means.
struct MetricReport {
  std::vector<std::string> ids;
  std::vector<double> f;    // per-sample F-measure
  std::vector<double> err;  // per-sample MAE
  double mean_f = 0.0;
  double mean_mae = 0.0;
  double beta2 = 0.3;
  int count = 0;

  void add(const std::string& id, double f_value, double mae_value);
  void finalize();  // fills the corpus means
};

// One row per sample (id,f_measure,mae) followed by a mean row; %.17g floats
// so identical reports serialize to identical bytes.
void write_metric_csv(std::ostream& out, const MetricReport& rep);
nlohmann::json metric_report_to_json(const MetricReport& rep);

// ---------------------------------------------------------------------------
// Forgetting-event distributions
//
// Every tracked pixel contributes one observation per prediction stream
// (focal-stack and all-focus), split by whether the training label disagrees
// with the clean mask at that pixel.

// Fraction of observations whose forgetting count exceeds the event
// threshold, per population. `applicable` is false when either population is
// empty (a zero-noise corpus has no noisy pixels to compare against).
struct ForgettingSplit {
  double noisy_fraction = 0.0;
  double clean_fraction = 0.0;
  std::int64_t noisy_count = 0;
  std::int64_t clean_count = 0;
  bool applicable = false;
};

// Distribution of the epoch at which a pixel's prediction first agreed with
// its training label. `bins[e]` counts observations first learned at epoch e;
// `*_never` counts observations that never agreed. Means are over learned
// observations only and NaN when that population is empty.
struct FirstLearnHistogram {
  std::vector<std::int64_t> noisy;
  std::vector<std::int64_t> clean;
  std::int64_t noisy_never = 0;
  std::int64_t clean_never = 0;
  double noisy_mean = 0.0;
  double clean_mean = 0.0;
};

struct ForgettingReport {
  int event_threshold = 3;
  int last_epoch = -1;
  ForgettingSplit overall;     // every tracked pixel
  ForgettingSplit object_box;  // restricted to the clean mask's bounding box
  FirstLearnHistogram first_learn;
  // Histograms of the forgetting counts themselves: index g counts
  // observations with exactly g forgetting events.
  std::vector<std::int64_t> events_noisy;
  std::vector<std::int64_t> events_clean;
};

// Cross-references the logged forgetting state with the corpus labels. Every
// corpus sample must be present in the state (StateError otherwise, which
// also covers runs that never logged forgetting); shapes must match the
// labels (ShapeError). The noisy/clean populations partition all tracked
// observations.
ForgettingReport forgetting_analysis(const ForgettingState& state,
                                     const std::vector<FocalStackSample>& corpus,
                                     int event_threshold = 3);

// CSV exports: "events,noisy,clean" count rows and "epoch,noisy,clean" rows
// (first-learn, with a final epoch=-1 row for never-learned observations).
void write_event_histogram_csv(std::ostream& out, const ForgettingReport& rep);
void write_first_learn_csv(std::ostream& out, const ForgettingReport& rep);
nlohmann::json forgetting_report_to_json(const ForgettingReport& rep);

// ---------------------------------------------------------------------------
// Cross-scene label-noise correlation
//
// One scatter point per scene relating where the label noise sits to what the
// image looks like there.

struct ScenePoint {
  std::string id;
  std::int64_t noisy_pixels = 0;
  double mean_intensity = 0.0;  // all-focus intensity averaged over noisy pixels
  double mean_distance = 0.0;   // mean distance from the clean-mask centroid,
                                // normalized by the image diagonal
};

struct CorrelationData {
  std::vector<ScenePoint> points;      // corpus order; scenes with >= 1 noisy pixel
  std::int64_t skipped_no_noise = 0;   // scenes whose labels agree everywhere
  std::int64_t skipped_no_object = 0;  // scenes with an empty clean mask
};

CorrelationData cross_scene_correlation(const std::vector<FocalStackSample>& corpus);

// "id,noisy_pixels,mean_intensity,mean_centroid_distance" rows, %.17g floats.
void write_correlation_csv(std::ostream& out, const CorrelationData& data);

// ---------------------------------------------------------------------------

// Writes a saliency map as an 8-bit PGM: [0,1] -> [0,255], rounding half up.
void render_map(const Tensor& s, const std::string& path);

}  // namespace lfsal
