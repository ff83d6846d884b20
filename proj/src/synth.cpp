#include "lfsal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>

#include "lfsal/image.hpp"
#include "lfsal/jsonio.hpp"
#include "lfsal/rng.hpp"

namespace fs = std::filesystem;

namespace lfsal {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kPlacementAttempts = 100;

// Snap to the 8-bit grid so in-memory samples equal their PGM round trip.
void quantize8(Tensor& t) {
  for (std::int64_t i = 0; i < t.size(); ++i) {
    t[i] = std::floor(std::clamp(t[i], 0.0, 1.0) * 255.0 + 0.5) / 255.0;
  }
}

struct ShapeDef {
  int type = 0;  // 0 ellipse, 1 rectangle, 2 diamond
  double cx = 0, cy = 0, rx = 1, ry = 1;
  double depth = 0.5;
  double base = 0.8, amp = 0.05, fx = 0.5, fy = 0.5, phase = 0.0;
};

bool inside_shape(const ShapeDef& s, int x, int y) {
  const double dx = std::abs((x - s.cx) / s.rx);
  const double dy = std::abs((y - s.cy) / s.ry);
  switch (s.type) {
    case 0: return dx * dx + dy * dy <= 1.0;
    case 1: return dx <= 1.0 && dy <= 1.0;
    default: return dx + dy <= 1.0;
  }
}

std::vector<std::pair<int, int>> disc_offsets(int radius) {
  std::vector<std::pair<int, int>> off;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dy * dy + dx * dx <= radius * radius) off.emplace_back(dy, dx);
    }
  }
  return off;
}

Tensor morph(const Tensor& mask, int radius, bool dilate) {
  const int h = mask.dim(0), w = mask.dim(1);
  const auto off = disc_offsets(radius);
  Tensor out({h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = dilate ? 0.0 : 1.0;
      for (const auto& [dy, dx] : off) {
        const int yy = y + dy, xx = x + dx;
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        const double m = mask.at(yy, xx);
        v = dilate ? std::max(v, m) : std::min(v, m);
      }
      out.at(y, x) = v;
    }
  }
  return out;
}

// Channel-mean luminance of a (c,h,w) or (h,w) image.
Tensor luminance(const Tensor& img) {
  if (img.ndim() == 2) return img;
  if (img.ndim() != 3) {
    throw ShapeError("image must be (h,w) or (c,h,w), got " + img.shape_string());
  }
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor lum({h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i) {
      lum[i] += img[static_cast<std::int64_t>(ch) * h * w + i] / c;
    }
  }
  return lum;
}

}  // namespace

void SceneSpec::validate() const {
  if (height < 16 || width < 16 || height % 16 != 0 || width % 16 != 0) {
    throw ConfigError("scene size " + std::to_string(height) + "x" +
                      std::to_string(width) + " must be multiples of 16");
  }
  if (objects < 1) throw ConfigError("scene needs at least one object");
  if (clutter < 0.0 || clutter > 1.0) {
    throw ConfigError("clutter level must lie in [0,1]");
  }
}

void NoiseSpec::validate() const {
  if (rate < 0.0 || rate > 1.0) throw ConfigError("noise rate must lie in [0,1]");
  if (morph_radius < 0) throw ConfigError("morphology radius must be >= 0");
  if (holes < 0 || blobs < 0) throw ConfigError("hole/blob counts must be >= 0");
}

void GenConfig::validate() const {
  scene.validate();
  noise.validate();
  if (k < 2 || k > 12) throw ConfigError("slice count k must lie in 2..12");
  if (blur_scale < 0.0) throw ConfigError("blur scale must be >= 0");
  if (count < 1) throw ConfigError("sample count must be >= 1");
}

const char* noise_mode_name(NoiseSpec::Mode mode) {
  return mode == NoiseSpec::Mode::corruption ? "corruption" : "heuristic";
}

NoiseSpec::Mode noise_mode_from_name(const std::string& name) {
  if (name == "corruption") return NoiseSpec::Mode::corruption;
  if (name == "heuristic") return NoiseSpec::Mode::heuristic;
  throw ConfigError("unknown noise mode '" + name + "'");
}

SceneRender render_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const int h = spec.height, w = spec.width;

  // Background: an affine luminance ramp plus optional smooth clutter bumps
  // and fine per-pixel noise.
  Tensor img({1, h, w});
  const double g0 = rng.uniform(0.3, 0.5);
  const double gx = rng.uniform(-0.25, 0.25);
  const double gy = rng.uniform(-0.25, 0.25);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(0, y, x) = g0 + gx * x / (w - 1.0) + gy * y / (h - 1.0);
    }
  }
  if (spec.clutter > 0.0) {
    for (int b = 0; b < 6; ++b) {
      const double bcx = rng.uniform(0.0, w - 1.0);
      const double bcy = rng.uniform(0.0, h - 1.0);
      const double brad = rng.uniform(std::min(h, w) / 8.0, std::min(h, w) / 3.0);
      const double bamp = rng.uniform(-0.18, 0.18) * spec.clutter;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double d2 = (x - bcx) * (x - bcx) + (y - bcy) * (y - bcy);
          img.at(0, y, x) += bamp * std::exp(-d2 / (2.0 * brad * brad));
        }
      }
    }
    for (std::int64_t i = 0; i < img.size(); ++i) {
      img[i] += spec.clutter * 0.06 * (2.0 * rng.uniform() - 1.0);
    }
  }
  const double bg_mean = img.mean();

  Tensor depth({h, w});
  depth.fill(rng.uniform(0.6, 0.95));

  // Place the salient shapes; re-sample the whole arrangement until the union
  // area lands in the contract window and every shape is visibly present.
  Tensor mask({h, w});
  std::vector<ShapeDef> shapes;
  bool placed = false;
  for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
    mask.zero();
    shapes.clear();
    const double union_target = rng.uniform(0.08, 0.30);
    bool ok = true;
    for (int obj = 0; obj < spec.objects && ok; ++obj) {
      ShapeDef s;
      s.type = static_cast<int>(rng.index(3));
      const double area = union_target * h * w / spec.objects;
      const double q = rng.uniform(0.6, 1.6);  // aspect ratio rx/ry
      const double prod =
          s.type == 0 ? area / kPi : (s.type == 1 ? area / 4.0 : area / 2.0);
      s.rx = std::sqrt(prod * q);
      s.ry = std::sqrt(prod / q);
      if (2.0 * s.rx > w - 8.0 || 2.0 * s.ry > h - 8.0) {
        ok = false;
        break;
      }
      s.cx = rng.uniform(s.rx + 2.0, w - 3.0 - s.rx);
      s.cy = rng.uniform(s.ry + 2.0, h - 3.0 - s.ry);
      s.depth = rng.uniform(0.05, 0.5);
      s.base = bg_mean < 0.5 ? rng.uniform(0.7, 0.95) : rng.uniform(0.05, 0.3);
      s.amp = rng.uniform(0.03, 0.10);
      s.fx = rng.uniform(0.3, 1.2);
      s.fy = rng.uniform(0.3, 1.2);
      s.phase = rng.uniform(0.0, 2.0 * kPi);
      shapes.push_back(s);
    }
    if (!ok) continue;
    std::vector<int> counts(shapes.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (std::size_t si = 0; si < shapes.size(); ++si) {
          if (inside_shape(shapes[si], x, y)) {
            mask.at(y, x) = 1.0;
            ++counts[si];
          }
        }
      }
    }
    const double fraction = mask.sum() / (static_cast<double>(h) * w);
    placed = fraction >= 0.03 && fraction <= 0.45 &&
             std::all_of(counts.begin(), counts.end(), [](int c) { return c >= 4; });
  }
  if (!placed) {
    throw GenerationError("object placement failed after " +
                          std::to_string(kPlacementAttempts) + " attempts");
  }

  // Paint far shapes first so the nearest one wins where they overlap.
  std::vector<const ShapeDef*> order;
  for (const auto& s : shapes) order.push_back(&s);
  std::sort(order.begin(), order.end(),
            [](const ShapeDef* a, const ShapeDef* b) { return a->depth > b->depth; });
  for (const ShapeDef* s : order) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!inside_shape(*s, x, y)) continue;
        img.at(0, y, x) = s->base + s->amp * std::sin(s->fx * x + s->fy * y + s->phase);
        depth.at(y, x) = s->depth;
      }
    }
  }
  quantize8(img);
  return SceneRender{std::move(img), std::move(depth), std::move(mask)};
}

std::vector<Tensor> render_focal_stack(const Tensor& allfocus, const Tensor& depth,
                                       int k, double blur_scale) {
  if (k < 2) throw ConfigError("focal stack needs k >= 2 slices");
  if (blur_scale < 0.0) throw ConfigError("blur scale must be >= 0");
  if (allfocus.ndim() != 3) {
    throw ShapeError("all-focus image must be (c,h,w), got " + allfocus.shape_string());
  }
  const int c = allfocus.dim(0), h = allfocus.dim(1), w = allfocus.dim(2);
  if (depth.ndim() != 2 || depth.dim(0) != h || depth.dim(1) != w) {
    throw ShapeError("depth map " + depth.shape_string() + " must be (" +
                     std::to_string(h) + ", " + std::to_string(w) + ")");
  }

  std::vector<Tensor> slices;
  slices.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const double dj = (j + 0.5) / k;  // focus plane of slice j+1
    Tensor out({c, h, w});
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double sigma = blur_scale * std::abs(depth.at(y, x) - dj);
        const int r = static_cast<int>(std::ceil(3.0 * sigma));
        if (r == 0) {
          for (int ch = 0; ch < c; ++ch) out.at(ch, y, x) = allfocus.at(ch, y, x);
          continue;
        }
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        double norm = 0.0;
        std::vector<double> acc(static_cast<std::size_t>(c), 0.0);
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          for (int dx = -r; dx <= r; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= w) continue;
            const double wgt = std::exp(-(dy * dy + dx * dx) * inv2s2);
            norm += wgt;
            for (int ch = 0; ch < c; ++ch) {
              acc[static_cast<std::size_t>(ch)] += wgt * allfocus.at(ch, yy, xx);
            }
          }
        }
        for (int ch = 0; ch < c; ++ch) {
          out.at(ch, y, x) = acc[static_cast<std::size_t>(ch)] / norm;
        }
      }
    }
    slices.push_back(std::move(out));
  }
  return slices;
}

Tensor corrupt_label(const Tensor& clean, const NoiseSpec& noise, std::uint64_t seed) {
  noise.validate();
  if (clean.ndim() != 2) {
    throw ShapeError("clean mask must be (h,w), got " + clean.shape_string());
  }
  const int h = clean.dim(0), w = clean.dim(1);
  Rng rng(seed);
  Tensor out = clean;

  if (noise.morph_radius > 0) {
    out = morph(out, noise.morph_radius, /*dilate=*/rng.bernoulli(0.5));
  }

  auto pixels_where = [&](double value) {
    std::vector<std::int64_t> idx;
    for (std::int64_t i = 0; i < out.size(); ++i) {
      if (out[i] == value) idx.push_back(i);
    }
    return idx;
  };
  auto punch_disc = [&](std::int64_t center, int radius, double value) {
    const int cy = static_cast<int>(center / w), cx = static_cast<int>(center % w);
    for (const auto& [dy, dx] : disc_offsets(radius)) {
      const int yy = cy + dy, xx = cx + dx;
      if (yy >= 0 && yy < h && xx >= 0 && xx < w) out.at(yy, xx) = value;
    }
  };
  for (int i = 0; i < noise.holes; ++i) {
    const auto object = pixels_where(1.0);
    if (object.empty()) break;
    punch_disc(object[rng.index(object.size())], rng.range(1, 3), 0.0);
  }
  for (int i = 0; i < noise.blobs; ++i) {
    const auto background = pixels_where(0.0);
    if (background.empty()) break;
    punch_disc(background[rng.index(background.size())], rng.range(1, 3), 1.0);
  }

  // Independent flips last, one uniform per pixel in row-major order.
  for (std::int64_t i = 0; i < out.size(); ++i) {
    if (rng.uniform() < noise.rate) out[i] = 1.0 - out[i];
  }
  return out;
}

Tensor heuristic_label(const Tensor& allfocus, const std::vector<Tensor>& slices,
                       bool* degenerate) {
  (void)slices;  // the heuristic scores the all-focus view only
  const Tensor lum = luminance(allfocus);
  const int h = lum.dim(0), w = lum.dim(1);
  if (degenerate) *degenerate = false;

  // Contrast against the mean of a 2-pixel boundary ring.
  const int ring = std::max(1, std::min({2, h / 2, w / 2}));
  double bsum = 0.0;
  int bcount = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (y < ring || y >= h - ring || x < ring || x >= w - ring) {
        bsum += lum.at(y, x);
        ++bcount;
      }
    }
  }
  const double bmean = bsum / bcount;

  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double sx = w / 4.0, sy = h / 4.0;
  Tensor score({h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double contrast = std::abs(lum.at(y, x) - bmean);
      const double prior = std::exp(
          -0.5 * (((x - cx) / sx) * ((x - cx) / sx) + ((y - cy) / sy) * ((y - cy) / sy)));
      score.at(y, x) = contrast * prior;
    }
  }
  const double peak = score.max();
  if (peak <= 1e-12) {  // flat image: nothing salient to find
    if (degenerate) *degenerate = true;
    return Tensor({h, w});
  }
  score *= 1.0 / peak;
  const double thr = score.mean();
  Tensor label({h, w});
  for (std::int64_t i = 0; i < score.size(); ++i) label[i] = score[i] > thr ? 1.0 : 0.0;
  return label;
}

FocalStackSample generate_sample(const GenConfig& cfg, std::uint64_t seed, int index) {
  cfg.validate();
  const std::uint64_t sample_seed = mix_seed(seed, static_cast<std::uint64_t>(index));
  SceneRender scene = render_scene(cfg.scene, mix_seed(sample_seed, 1));
  std::vector<Tensor> slices =
      render_focal_stack(scene.allfocus, scene.depth, cfg.k, cfg.blur_scale);
  for (Tensor& s : slices) quantize8(s);

  FocalStackSample sample;
  std::ostringstream id;
  id << 's' << std::setw(4) << std::setfill('0') << index;
  sample.id = id.str();
  sample.allfocus = std::move(scene.allfocus);
  sample.slices = std::move(slices);
  sample.clean = std::move(scene.clean);
  if (cfg.noise.mode == NoiseSpec::Mode::corruption) {
    sample.noisy = corrupt_label(sample.clean, cfg.noise, mix_seed(sample_seed, 2));
  } else {
    sample.noisy = heuristic_label(sample.allfocus, sample.slices);
  }
  sample.meta = {{"id", sample.id},
                 {"index", index},
                 {"seed", sample_seed},
                 {"scene", scene_spec_to_json(cfg.scene)},
                 {"k", cfg.k},
                 {"blur_scale", cfg.blur_scale},
                 {"noise", noise_spec_to_json(cfg.noise)}};
  return sample;
}

std::vector<FocalStackSample> generate_corpus(const GenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<FocalStackSample> samples;
  samples.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) samples.push_back(generate_sample(cfg, seed, i));
  return samples;
}

void write_corpus(const std::string& dir, const std::vector<FocalStackSample>& samples) {
  fs::create_directories(dir);
  for (const auto& s : samples) {
    const fs::path sub = fs::path(dir) / s.id;
    fs::create_directories(sub);
    write_pgm((sub / "allfocus.pgm").string(), s.allfocus);
    for (std::size_t j = 0; j < s.slices.size(); ++j) {
      std::ostringstream name;
      name << "slice_" << std::setw(2) << std::setfill('0') << j << ".pgm";
      write_pgm((sub / name.str()).string(), s.slices[j]);
    }
    write_pgm((sub / "noisy.pgm").string(), s.noisy);
    write_pgm((sub / "clean.pgm").string(), s.clean);
    save_json_file((sub / "meta.json").string(), s.meta);
  }
}

namespace {

Tensor read_mask(const std::string& path) {
  Tensor m = read_pgm(path);
  for (std::int64_t i = 0; i < m.size(); ++i) m[i] = m[i] > 0.5 ? 1.0 : 0.0;
  return m;
}

Tensor read_image_chw(const std::string& path) {
  Tensor img = read_pgm(path);
  return Tensor::from({1, img.dim(0), img.dim(1)},
                      std::vector<double>(img.data(), img.data() + img.size()));
}

}  // namespace

std::vector<FocalStackSample> read_corpus(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("corpus directory '" + dir + "' not found");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) {
      ids.push_back(entry.path().filename().string());
    }
  }
  std::sort(ids.begin(), ids.end());

  std::vector<FocalStackSample> samples;
  samples.reserve(ids.size());
  for (const std::string& id : ids) {
    const fs::path sub = fs::path(dir) / id;
    FocalStackSample s;
    s.id = id;
    s.meta = load_json_file((sub / "meta.json").string());
    if (!s.meta.contains("k")) {
      throw IoError("'" + (sub / "meta.json").string() + "' lacks the slice count k");
    }
    const int k = s.meta["k"].get<int>();
    s.allfocus = read_image_chw((sub / "allfocus.pgm").string());
    for (int j = 0; j < k; ++j) {
      std::ostringstream name;
      name << "slice_" << std::setw(2) << std::setfill('0') << j << ".pgm";
      const fs::path slice_path = sub / name.str();
      if (!fs::exists(slice_path)) {
        throw IoError("missing focal slice '" + slice_path.string() + "'");
      }
      s.slices.push_back(read_image_chw(slice_path.string()));
    }
    s.noisy = read_mask((sub / "noisy.pgm").string());
    s.clean = read_mask((sub / "clean.pgm").string());
    samples.push_back(std::move(s));
  }
  return samples;
}

nlohmann::json scene_spec_to_json(const SceneSpec& s) {
  return {{"height", s.height},
          {"width", s.width},
          {"objects", s.objects},
          {"clutter", s.clutter}};
}

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
  require_known_keys(j, {"height", "width", "objects", "clutter"}, "scene spec");
  SceneSpec s;
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.objects = j.value("objects", s.objects);
  s.clutter = j.value("clutter", s.clutter);
  return s;
}

nlohmann::json noise_spec_to_json(const NoiseSpec& s) {
  return {{"mode", noise_mode_name(s.mode)},
          {"rate", s.rate},
          {"morph_radius", s.morph_radius},
          {"holes", s.holes},
          {"blobs", s.blobs}};
}

NoiseSpec noise_spec_from_json(const nlohmann::json& j) {
  require_known_keys(j, {"mode", "rate", "morph_radius", "holes", "blobs"},
                     "noise spec");
  NoiseSpec s;
  s.mode = noise_mode_from_name(j.value("mode", std::string(noise_mode_name(s.mode))));
  s.rate = j.value("rate", s.rate);
  s.morph_radius = j.value("morph_radius", s.morph_radius);
  s.holes = j.value("holes", s.holes);
  s.blobs = j.value("blobs", s.blobs);
  return s;
}

nlohmann::json gen_config_to_json(const GenConfig& c) {
  return {{"scene", scene_spec_to_json(c.scene)},
          {"k", c.k},
          {"blur_scale", c.blur_scale},
          {"noise", noise_spec_to_json(c.noise)},
          {"count", c.count}};
}

GenConfig gen_config_from_json(const nlohmann::json& j) {
  require_known_keys(j, {"scene", "k", "blur_scale", "noise", "count"},
                     "generation config");
  GenConfig c;
  if (j.contains("scene")) c.scene = scene_spec_from_json(j["scene"]);
  if (j.contains("noise")) c.noise = noise_spec_from_json(j["noise"]);
  c.k = j.value("k", c.k);
  c.blur_scale = j.value("blur_scale", c.blur_scale);
  c.count = j.value("count", c.count);
  return c;
}

}  // namespace lfsal
