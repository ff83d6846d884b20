#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lfsal/tensor.hpp"

namespace lfsal {

// Scene geometry knobs. Depths live in [0,1] (0 = near plane, 1 = far).
struct SceneSpec {
  int height = 64;        // u — multiple of 16 (four 2x downsampling stages)
  int width = 64;         // v — multiple of 16
  int objects = 1;        // salient textured shapes; the mask is their union
  double clutter = 0.5;   // background clutter level in [0,1]

  void validate() const;
};

// Label-noise model applied to the clean mask (corruption mode) or swapped
// for the contrast/center heuristic (heuristic mode).
struct NoiseSpec {
  enum class Mode { corruption, heuristic };
  Mode mode = Mode::corruption;
  double rate = 0.1;      // independent per-pixel flip probability
  int morph_radius = 2;   // boundary dilation-or-erosion radius, pixels
  int holes = 0;          // discs punched inside the object
  int blobs = 0;          // discs added on the background

  void validate() const;
};

const char* noise_mode_name(NoiseSpec::Mode mode);
NoiseSpec::Mode noise_mode_from_name(const std::string& name);

struct SceneRender {
  Tensor allfocus;  // (1,h,w), values on the 8-bit grid
  Tensor depth;     // (h,w) in [0,1]
  Tensor clean;     // (h,w) binary
};

// One training/evaluation scene: the clean mask is hidden from training.
struct FocalStackSample {
  std::string id;
  Tensor allfocus;             // (1,h,w)
  std::vector<Tensor> slices;  // k focal slices, each (1,h,w)
  Tensor noisy;                // (h,w) binary label used for training
  Tensor clean;                // (h,w) binary mask — evaluation only
  nlohmann::json meta;         // seed, scene spec, noise spec echo
};

// The slice of a sample the training path is allowed to see. The clean mask
// is absent by construction, so no training code can read it.
struct TrainView {
  const std::string& id;
  const Tensor& allfocus;
  const std::vector<Tensor>& slices;
  const Tensor& noisy;
};

inline TrainView train_view(const FocalStackSample& s) {
  return TrainView{s.id, s.allfocus, s.slices, s.noisy};
}

// Deterministic in (spec, seed): textured geometric shapes at sampled depths
// over a gradient-plus-clutter background. Placement failures after bounded
// retries raise GenerationError.
SceneRender render_scene(const SceneSpec& spec, std::uint64_t seed);

// Slice j (1-based) focuses at depth d_j = (j - 1/2)/k; each pixel is blurred
// with a Gaussian of sigma = blur_scale * |depth(pixel) - d_j|. sigma = 0
// reproduces the all-focus pixel exactly.
std::vector<Tensor> render_focal_stack(const Tensor& allfocus, const Tensor& depth,
                                       int k, double blur_scale);

// Applies, in order: boundary dilation-or-erosion, hole punching, background
// blobs, then independent per-pixel flips at `rate`. Binary output.
Tensor corrupt_label(const Tensor& clean, const NoiseSpec& noise, std::uint64_t seed);

// Contrast-times-center-prior saliency guess binarized at its mean score.
// A flat (degenerate) image yields an all-zero label and sets *degenerate.
Tensor heuristic_label(const Tensor& allfocus, const std::vector<Tensor>& slices,
                       bool* degenerate = nullptr);

// Full generation config consumed by the CLI.
struct GenConfig {
  SceneSpec scene;
  int k = 4;               // focal slices, 2..12
  double blur_scale = 2.0;
  NoiseSpec noise;
  int count = 200;         // samples in the corpus

  void validate() const;
};

FocalStackSample generate_sample(const GenConfig& cfg, std::uint64_t seed, int index);
std::vector<FocalStackSample> generate_corpus(const GenConfig& cfg, std::uint64_t seed);

// Directory layout: <dir>/<id>/{allfocus.pgm, slice_00.pgm.., noisy.pgm,
// clean.pgm, meta.json}. Reading returns samples sorted by id and round-trips
// written corpora bit-exactly.
void write_corpus(const std::string& dir, const std::vector<FocalStackSample>& samples);
std::vector<FocalStackSample> read_corpus(const std::string& dir);

// JSON echo/parse helpers shared by generation configs and manifests.
nlohmann::json scene_spec_to_json(const SceneSpec& s);
SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json noise_spec_to_json(const NoiseSpec& s);
NoiseSpec noise_spec_from_json(const nlohmann::json& j);
nlohmann::json gen_config_to_json(const GenConfig& c);
GenConfig gen_config_from_json(const nlohmann::json& j);

}  // namespace lfsal
