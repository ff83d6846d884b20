#include "lfsal/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "lfsal/error.hpp"
#include "lfsal/image.hpp"

namespace lfsal {

namespace {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double fraction(std::int64_t part, std::int64_t whole) {
  return whole == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(whole);
}

double mean_or_nan(std::int64_t sum, std::int64_t count) {
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(sum) / static_cast<double>(count);
}

void bump(std::vector<std::int64_t>& hist, std::int64_t bin) {
  if (bin >= static_cast<std::int64_t>(hist.size())) hist.resize(bin + 1, 0);
  ++hist[bin];
}

nlohmann::json json_number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

double f_measure(const Tensor& s, const Tensor& y, double beta2) {
  require_same_shape(s, y, "f_measure");
  const double thr = std::min(2.0 * s.mean(), 1.0);
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (std::int64_t i = 0; i < s.size(); ++i) {
    const bool pred = s[i] > thr;
    const bool mask = y[i] > 0.5;
    tp += pred && mask;
    fp += pred && !mask;
    fn += !pred && mask;
  }
  const bool empty_pred = tp + fp == 0;
  const bool empty_mask = tp + fn == 0;
  if (empty_pred && empty_mask) return 1.0;
  if (empty_pred || empty_mask) return 0.0;
  if (tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return (1.0 + beta2) * p * r / (beta2 * p + r);
}

double mae(const Tensor& s, const Tensor& y) {
  require_same_shape(s, y, "mae");
  double acc = 0.0;
  for (std::int64_t i = 0; i < s.size(); ++i) acc += std::abs(s[i] - y[i]);
  return acc / static_cast<double>(s.size());
}

void MetricReport::add(const std::string& id, double f_value, double mae_value) {
  ids.push_back(id);
  f.push_back(f_value);
  err.push_back(mae_value);
}

void MetricReport::finalize() {
  count = static_cast<int>(ids.size());
  mean_f = 0.0;
  mean_mae = 0.0;
  if (count == 0) return;
  for (double v : f) mean_f += v;
  for (double v : err) mean_mae += v;
  mean_f /= count;
  mean_mae /= count;
}

void write_metric_csv(std::ostream& out, const MetricReport& rep) {
  out << "id,f_measure,mae\n";
  for (std::size_t i = 0; i < rep.ids.size(); ++i) {
    out << rep.ids[i] << ',' << format_g17(rep.f[i]) << ',' << format_g17(rep.err[i])
        << '\n';
  }
  out << "mean," << format_g17(rep.mean_f) << ',' << format_g17(rep.mean_mae) << '\n';
}

nlohmann::json metric_report_to_json(const MetricReport& rep) {
  return {{"count", rep.count},
          {"beta2", rep.beta2},
          {"mean_f", rep.mean_f},
          {"mean_mae", rep.mean_mae}};
}

ForgettingReport forgetting_analysis(const ForgettingState& state,
                                     const std::vector<FocalStackSample>& corpus,
                                     int event_threshold) {
  if (event_threshold < 0) throw ConfigError("event threshold must be >= 0");
  if (corpus.empty()) throw ConfigError("forgetting analysis needs a non-empty corpus");
  if (state.size() == 0) {
    throw StateError(
        "forgetting analysis requires a run that logged forgetting state "
        "(variants without forgetting tracking record none)");
  }

  ForgettingReport rep;
  rep.event_threshold = event_threshold;
  rep.events_noisy.assign(1, 0);
  rep.events_clean.assign(1, 0);

  std::int64_t over_noisy = 0, over_clean = 0;
  std::int64_t box_over_noisy = 0, box_over_clean = 0;
  std::int64_t learn_sum_noisy = 0, learn_sum_clean = 0;
  std::int64_t learned_noisy = 0, learned_clean = 0;

  for (const FocalStackSample& sample : corpus) {
    const SampleForgetting& log = state.at(sample.id);  // StateError if untracked
    require_same_shape(sample.noisy, sample.clean, "forgetting_analysis");
    require_same_shape(log.g_f, sample.noisy, "forgetting_analysis");
    require_same_shape(log.g_r, sample.noisy, "forgetting_analysis");
    rep.last_epoch = std::max(rep.last_epoch, log.last_epoch);

    const int h = sample.noisy.dim(0), w = sample.noisy.dim(1);

    // Bounding box of the salient object in the clean mask; empty masks
    // contribute nothing to the box-restricted split.
    int top = h, bottom = -1, left = w, right = -1;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (sample.clean.at(r, c) > 0.5) {
          top = std::min(top, r);
          bottom = std::max(bottom, r);
          left = std::min(left, c);
          right = std::max(right, c);
        }
      }
    }

    const Tensor* counts[2] = {&log.g_f, &log.g_r};
    const Tensor* first[2] = {&log.first_learn_f, &log.first_learn_r};
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const bool noisy_pixel =
            std::abs(sample.noisy.at(r, c) - sample.clean.at(r, c)) > 0.5;
        const bool in_box = bottom >= 0 && r >= top && r <= bottom && c >= left &&
                            c <= right;
        for (int stream = 0; stream < 2; ++stream) {
          const auto g = static_cast<std::int64_t>(std::llround(counts[stream]->at(r, c)));
          const auto fl = static_cast<std::int64_t>(std::llround(first[stream]->at(r, c)));
          const bool over = g > event_threshold;
          if (noisy_pixel) {
            ++rep.overall.noisy_count;
            over_noisy += over;
            bump(rep.events_noisy, g);
            if (in_box) {
              ++rep.object_box.noisy_count;
              box_over_noisy += over;
            }
            if (fl >= 0) {
              bump(rep.first_learn.noisy, fl);
              learn_sum_noisy += fl;
              ++learned_noisy;
            } else {
              ++rep.first_learn.noisy_never;
            }
          } else {
            ++rep.overall.clean_count;
            over_clean += over;
            bump(rep.events_clean, g);
            if (in_box) {
              ++rep.object_box.clean_count;
              box_over_clean += over;
            }
            if (fl >= 0) {
              bump(rep.first_learn.clean, fl);
              learn_sum_clean += fl;
              ++learned_clean;
            } else {
              ++rep.first_learn.clean_never;
            }
          }
        }
      }
    }
  }

  rep.overall.noisy_fraction = fraction(over_noisy, rep.overall.noisy_count);
  rep.overall.clean_fraction = fraction(over_clean, rep.overall.clean_count);
  rep.overall.applicable = rep.overall.noisy_count > 0 && rep.overall.clean_count > 0;
  rep.object_box.noisy_fraction = fraction(box_over_noisy, rep.object_box.noisy_count);
  rep.object_box.clean_fraction = fraction(box_over_clean, rep.object_box.clean_count);
  rep.object_box.applicable =
      rep.object_box.noisy_count > 0 && rep.object_box.clean_count > 0;

  const auto bins = static_cast<std::size_t>(std::max(rep.last_epoch + 1, 1));
  rep.first_learn.noisy.resize(std::max(rep.first_learn.noisy.size(), bins), 0);
  rep.first_learn.clean.resize(std::max(rep.first_learn.clean.size(), bins), 0);
  rep.first_learn.noisy_mean = mean_or_nan(learn_sum_noisy, learned_noisy);
  rep.first_learn.clean_mean = mean_or_nan(learn_sum_clean, learned_clean);

  const std::size_t levels = std::max(rep.events_noisy.size(), rep.events_clean.size());
  rep.events_noisy.resize(levels, 0);
  rep.events_clean.resize(levels, 0);
  return rep;
}

void write_event_histogram_csv(std::ostream& out, const ForgettingReport& rep) {
  out << "events,noisy,clean\n";
  for (std::size_t g = 0; g < rep.events_noisy.size(); ++g) {
    out << g << ',' << rep.events_noisy[g] << ',' << rep.events_clean[g] << '\n';
  }
}

void write_first_learn_csv(std::ostream& out, const ForgettingReport& rep) {
  out << "epoch,noisy,clean\n";
  for (std::size_t e = 0; e < rep.first_learn.noisy.size(); ++e) {
    out << e << ',' << rep.first_learn.noisy[e] << ',' << rep.first_learn.clean[e]
        << '\n';
  }
  // Observations that never agreed with their label land in an epoch=-1 row.
  out << "-1," << rep.first_learn.noisy_never << ',' << rep.first_learn.clean_never
      << '\n';
}

nlohmann::json forgetting_report_to_json(const ForgettingReport& rep) {
  auto split = [](const ForgettingSplit& s) {
    return nlohmann::json{{"noisy_fraction", s.noisy_fraction},
                          {"clean_fraction", s.clean_fraction},
                          {"noisy_count", s.noisy_count},
                          {"clean_count", s.clean_count},
                          {"applicable", s.applicable}};
  };
  return {{"event_threshold", rep.event_threshold},
          {"last_epoch", rep.last_epoch},
          {"overall", split(rep.overall)},
          {"object_box", split(rep.object_box)},
          {"first_learn",
           {{"noisy", rep.first_learn.noisy},
            {"clean", rep.first_learn.clean},
            {"noisy_never", rep.first_learn.noisy_never},
            {"clean_never", rep.first_learn.clean_never},
            {"noisy_mean", json_number_or_null(rep.first_learn.noisy_mean)},
            {"clean_mean", json_number_or_null(rep.first_learn.clean_mean)}}}};
}

CorrelationData cross_scene_correlation(const std::vector<FocalStackSample>& corpus) {
  CorrelationData data;
  for (const FocalStackSample& sample : corpus) {
    require_same_shape(sample.noisy, sample.clean, "cross_scene_correlation");
    const int h = sample.noisy.dim(0), w = sample.noisy.dim(1);
    if (sample.allfocus.size() != sample.noisy.size()) {
      throw ShapeError("cross_scene_correlation: all-focus image " +
                       sample.allfocus.shape_string() + " does not cover the label " +
                       sample.noisy.shape_string());
    }

    double centroid_r = 0.0, centroid_c = 0.0;
    std::int64_t object_pixels = 0;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (sample.clean.at(r, c) > 0.5) {
          centroid_r += r;
          centroid_c += c;
          ++object_pixels;
        }
      }
    }
    if (object_pixels == 0) {
      ++data.skipped_no_object;
      continue;
    }
    centroid_r /= static_cast<double>(object_pixels);
    centroid_c /= static_cast<double>(object_pixels);

    const double diagonal = std::hypot(static_cast<double>(h), static_cast<double>(w));
    double sum_intensity = 0.0, sum_distance = 0.0;
    std::int64_t noisy_pixels = 0;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (std::abs(sample.noisy.at(r, c) - sample.clean.at(r, c)) > 0.5) {
          sum_intensity += sample.allfocus[static_cast<std::int64_t>(r) * w + c];
          sum_distance += std::hypot(r - centroid_r, c - centroid_c);
          ++noisy_pixels;
        }
      }
    }
    if (noisy_pixels == 0) {
      ++data.skipped_no_noise;
      continue;
    }
    data.points.push_back({sample.id, noisy_pixels,
                           sum_intensity / static_cast<double>(noisy_pixels),
                           sum_distance / static_cast<double>(noisy_pixels) / diagonal});
  }
  return data;
}

void write_correlation_csv(std::ostream& out, const CorrelationData& data) {
  out << "id,noisy_pixels,mean_intensity,mean_centroid_distance\n";
  for (const ScenePoint& p : data.points) {
    out << p.id << ',' << p.noisy_pixels << ',' << format_g17(p.mean_intensity) << ','
        << format_g17(p.mean_distance) << '\n';
  }
}

void render_map(const Tensor& s, const std::string& path) { write_pgm(path, s); }

}  // namespace lfsal
