// Copyright 2026 The SOTA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sota/scene_synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "json_util.hpp"
#include "sota/errors.hpp"
#include "sota/png_io.hpp"
#include "sota/random.hpp"
#include "sota/threading.hpp"

namespace sota {
namespace {

using nlohmann::json;

struct Rgb {
  double r, g, b;
};

Rgb hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double hp = h * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c; g = x;
  } else if (hp < 2) {
    r = x; g = c;
  } else if (hp < 3) {
    g = c; b = x;
  } else if (hp < 4) {
    g = x; b = c;
  } else if (hp < 5) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

// Fixed per-class palette and pattern family; no randomness so that textures
// identify classes across the whole dataset.
Rgb class_base_color(int k) {
  if (k == 0) return {0.26, 0.26, 0.28};  // road asphalt
  const double hue = std::fmod(0.61803398875 * k, 1.0);
  const double val = 0.45 + 0.25 * std::fmod(k * 0.37, 1.0);
  return hsv_to_rgb(hue, 0.38, val);
}

double class_pattern(int k, int y, int x) {
  const int period = 8 + (k * 3) % 9;
  switch (k % 4) {
    case 0:
      return std::sin(2.0 * 3.14159265358979 * y / period);
    case 1:
      return (((y / period) + (x / period)) % 2 == 0) ? 1.0 : -1.0;
    case 2:
      return std::sin(2.0 * 3.14159265358979 * x / period);
    default:
      return std::sin(2.0 * 3.14159265358979 * (x + y) / (2.0 * period));
  }
}

// Stateless per-pixel speckle used for pasted objects.
double speckle(std::uint64_t key, int y, int x) {
  const std::uint64_t h = Rng::mix(key, (static_cast<std::uint64_t>(y) << 32) |
                                            static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

std::uint8_t quantize(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

struct RoadShape {
  int horizon;
  double top_cx, bot_cx, top_half, bot_half;

  bool contains(int y, int x, int height) const {
    if (y < horizon) return false;
    const double t = (height - 1 == horizon)
                         ? 1.0
                         : static_cast<double>(y - horizon) / (height - 1 - horizon);
    const double cx = top_cx + (bot_cx - top_cx) * t;
    const double half = top_half + (bot_half - top_half) * t;
    return std::abs(x - cx) <= half;
  }
  double center_at(int y, int height) const {
    const double t = (height - 1 == horizon)
                         ? 1.0
                         : static_cast<double>(y - horizon) / (height - 1 - horizon);
    return top_cx + (bot_cx - top_cx) * t;
  }
};

// True when the (2m+1)^2 box around (y,x) is entirely inside (or outside)
// the road region; keeps blob centroids on the intended side.
bool box_matches(const MaskU8& road, int y, int x, int m, std::uint8_t want) {
  const int h = road.dim(0), w = road.dim(1);
  for (int dy = -m; dy <= m; ++dy)
    for (int dx = -m; dx <= m; ++dx) {
      const int yy = y + dy, xx = x + dx;
      if (yy < 0 || yy >= h || xx < 0 || xx >= w) return false;
      if (road.at2(yy, xx) != want) return false;
    }
  return true;
}

}  // namespace

void SynthConfig::validate() const {
  if (num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
  if (num_classes > 256) throw ConfigError("synth: num_classes must fit in 8 bits");
  if (ood_paste_probability < 0.0 || ood_paste_probability > 1.0)
    throw ConfigError("synth: ood_paste_probability must be in [0,1]");
  if (on_road_fraction < 0.0 || on_road_fraction > 1.0)
    throw ConfigError("synth: on_road_fraction must be in [0,1]");
  if (noise_level < 0.0) throw ConfigError("synth: noise_level must be >= 0");
  if (objects_min < 0 || objects_max < objects_min)
    throw ConfigError("synth: invalid objects_per_scene range");
  if (height < 16 || width < 16) throw ConfigError("synth: image too small");
  if (downsample_factor < 1) throw ConfigError("synth: downsample_factor must be >= 1");
  if (height % downsample_factor != 0 || width % downsample_factor != 0)
    throw ShapeError("synth: image size " + std::to_string(height) + "x" +
                     std::to_string(width) + " not divisible by downsample factor " +
                     std::to_string(downsample_factor));
}

SceneSample synthesize_scene(const SynthConfig& config, std::int64_t index) {
  config.validate();
  const int h = config.height, w = config.width, num_classes = config.num_classes;
  Rng root(config.seed, static_cast<std::uint64_t>(index));
  Rng layout = root.split(1);
  Rng objects = root.split(2);
  Rng blobs = root.split(3);
  Rng noise = root.split(4);
  const std::uint64_t speckle_key = Rng::mix(config.seed, static_cast<std::uint64_t>(index));

  SceneSample s;
  s.class_labels = MaskU8({h, w});
  s.ood_mask = MaskU8({h, w});
  s.road_region = MaskU8({h, w});
  s.on_road_mask = MaskU8({h, w});

  // Road trapezoid and horizon.
  RoadShape road;
  road.horizon = static_cast<int>(h * layout.uniform(0.28, 0.42));
  road.bot_half = w * layout.uniform(0.28, 0.40);
  road.bot_cx = w * layout.uniform(0.42, 0.58);
  road.top_half = w * layout.uniform(0.02, 0.05);
  road.top_cx = w * layout.uniform(0.35, 0.65);

  const int side_count = num_classes - 1;
  const auto cyc = [&](std::int64_t offset) {
    return 1 + static_cast<int>((index + offset) % side_count);
  };
  const int sky_class = cyc(0);
  const int left_class = cyc(1);
  const int right_class = side_count >= 2 ? cyc(2) : left_class;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int cls;
      if (road.contains(y, x, h)) {
        cls = 0;
        s.road_region.at2(y, x) = 1;
      } else if (y < road.horizon) {
        cls = sky_class;
      } else {
        cls = x < road.center_at(y, h) ? left_class : right_class;
      }
      s.class_labels.at2(y, x) = static_cast<std::uint8_t>(cls);
    }
  }

  // Inlier rectangles sitting on the road (closed-set objects).
  const int num_rects = objects.uniform_int(0, 3);
  for (int j = 0; j < num_rects; ++j) {
    const int rect_class = 1 + static_cast<int>((index + 3 + j) % side_count);
    const int rh = std::max(3, static_cast<int>(h * objects.uniform(0.05, 0.14)));
    const int rw = std::max(3, static_cast<int>(w * objects.uniform(0.04, 0.12)));
    const int by = objects.uniform_int(road.horizon + (h - road.horizon) / 3, h - 2);
    const double cx = road.center_at(by, h) + objects.uniform(-0.5, 0.5) * road.bot_half;
    const int x0 = std::clamp(static_cast<int>(cx) - rw / 2, 0, w - 1);
    const int x1 = std::min(x0 + rw, w);
    const int y0 = std::max(0, by - rh);
    for (int y = y0; y < by; ++y)
      for (int x = x0; x < x1; ++x)
        s.class_labels.at2(y, x) = static_cast<std::uint8_t>(rect_class);
  }

  // Pasted OOD blobs: star-convex polygons with a foreign palette and heavy
  // speckle. class_labels keeps the occluded inlier class underneath.
  struct BlobSpec {
    double cy, cx, r;
    double amp[3], phase[3];
    Rgb color;
  };
  std::vector<BlobSpec> specs;
  if (blobs.bernoulli(config.ood_paste_probability)) {
    const int count = blobs.uniform_int(config.objects_min, config.objects_max);
    for (int j = 0; j < count; ++j) {
      BlobSpec b;
      b.r = std::min(h, w) * blobs.uniform(0.045, 0.105);
      const bool want_on_road = blobs.bernoulli(config.on_road_fraction);
      const int margin = std::max(2, static_cast<int>(b.r / 4.0));
      const int border = static_cast<int>(b.r) + 1;
      int cy = -1, cx = -1;
      for (int attempt = 0; attempt < 400; ++attempt) {
        const int ty = blobs.uniform_int(border, h - 1 - border);
        const int tx = blobs.uniform_int(border, w - 1 - border);
        if (box_matches(s.road_region, ty, tx, margin, want_on_road ? 1 : 0)) {
          cy = ty;
          cx = tx;
          break;
        }
      }
      if (cy < 0) continue;  // no placement found; skip this object
      b.cy = cy;
      b.cx = cx;
      for (int m = 0; m < 3; ++m) {
        b.amp[m] = blobs.uniform(0.0, 0.25) / (m + 1);
        b.phase[m] = blobs.uniform(0.0, 2.0 * 3.14159265358979);
      }
      b.color = hsv_to_rgb(blobs.uniform(0.0, 1.0), 0.95, 0.85);
      specs.push_back(b);
    }
  }

  std::vector<MaskU8> blob_masks;
  for (const auto& b : specs) {
    MaskU8 mask({h, w});
    double sum_y = 0, sum_x = 0;
    int count = 0;
    const int y0 = std::max(0, static_cast<int>(b.cy - 2 * b.r));
    const int y1 = std::min(h - 1, static_cast<int>(b.cy + 2 * b.r));
    const int x0 = std::max(0, static_cast<int>(b.cx - 2 * b.r));
    const int x1 = std::min(w - 1, static_cast<int>(b.cx + 2 * b.r));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dy = y - b.cy, dx = x - b.cx;
        const double theta = std::atan2(dy, dx);
        double rho = 1.0;
        for (int m = 0; m < 3; ++m) rho += b.amp[m] * std::cos((m + 1) * theta + b.phase[m]);
        if (std::sqrt(dy * dy + dx * dx) <= b.r * rho) {
          mask.at2(y, x) = 1;
          sum_y += y;
          sum_x += x;
          ++count;
        }
      }
    if (count == 0) continue;
    SceneSample::Blob info;
    info.centroid_y = sum_y / count;
    info.centroid_x = sum_x / count;
    info.pixel_count = count;
    const int iy = std::clamp(static_cast<int>(std::lround(info.centroid_y)), 0, h - 1);
    const int ix = std::clamp(static_cast<int>(std::lround(info.centroid_x)), 0, w - 1);
    info.centroid_on_road = s.road_region.at2(iy, ix) != 0;
    s.blobs.push_back(info);
    for (std::int64_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      s.ood_mask[i] = 1;
      if (info.centroid_on_road) s.on_road_mask[i] = 1;
    }
    blob_masks.push_back(std::move(mask));
  }

  // Render: class textures, then blobs on top, all on the 1/255 grid.
  s.image = Tensor<float>({3, h, w});
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int64_t i = static_cast<std::int64_t>(y) * w + x;
      const int cls = s.class_labels.at2(y, x);
      Rgb c = class_base_color(cls);
      const double pat = 0.08 * class_pattern(cls, y, x);
      if (cls == sky_class && y < road.horizon) {
        const double grad = 0.18 * (1.0 - static_cast<double>(y) / std::max(1, road.horizon));
        c.r += grad;
        c.g += grad;
        c.b += grad;
      }
      double rr = c.r + pat, gg = c.g + pat, bb = c.b + pat;

      int blob_idx = -1;
      for (std::size_t bi = 0; bi < blob_masks.size(); ++bi)
        if (blob_masks[bi][i]) blob_idx = static_cast<int>(bi);
      if (blob_idx >= 0) {
        const Rgb& fc = specs[static_cast<std::size_t>(blob_idx)].color;
        const double sp = 0.30 * speckle(Rng::mix(speckle_key, static_cast<std::uint64_t>(blob_idx)), y, x);
        rr = fc.r + sp;
        gg = fc.g + sp;
        bb = fc.b + sp;
      }
      const double n = config.noise_level;
      if (n > 0) {
        rr += n * noise.uniform(-1.0, 1.0);
        gg += n * noise.uniform(-1.0, 1.0);
        bb += n * noise.uniform(-1.0, 1.0);
      }
      s.image[0 * hw + i] = static_cast<float>(quantize(rr)) / 255.0f;
      s.image[1 * hw + i] = static_cast<float>(quantize(gg)) / 255.0f;
      s.image[2 * hw + i] = static_cast<float>(quantize(bb)) / 255.0f;
    }
  }
  return s;
}

namespace {

std::string stem_for(std::int64_t index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(index));
  return std::string(buf);
}

ImageU8 mask_to_image(const MaskU8& m, std::uint8_t scale) {
  ImageU8 img;
  img.height = m.dim(0);
  img.width = m.dim(1);
  img.channels = 1;
  img.pixels.resize(static_cast<std::size_t>(m.size()));
  for (std::int64_t i = 0; i < m.size(); ++i)
    img.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(m[i] * scale);
  return img;
}

MaskU8 image_to_mask(const ImageU8& img, bool binarize) {
  MaskU8 m({img.height, img.width});
  for (std::int64_t i = 0; i < m.size(); ++i) {
    const std::uint8_t v = img.pixels[static_cast<std::size_t>(i)];
    m[i] = binarize ? (v > 0 ? 1 : 0) : v;
  }
  return m;
}

void write_sample(const std::filesystem::path& dir, const std::string& stem,
                  const SceneSample& s) {
  const int h = s.class_labels.dim(0), w = s.class_labels.dim(1);
  ImageU8 img;
  img.height = h;
  img.width = w;
  img.channels = 3;
  img.pixels.resize(static_cast<std::size_t>(h) * w * 3);
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (std::int64_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c)
      img.pixels[static_cast<std::size_t>(i) * 3 + c] =
          static_cast<std::uint8_t>(std::lround(s.image[c * hw + i] * 255.0f));
  write_png(dir / (stem + ".image.png"), img);
  write_png(dir / (stem + ".labels.png"), mask_to_image(s.class_labels, 1));
  write_png(dir / (stem + ".ood.png"), mask_to_image(s.ood_mask, 255));
  write_png(dir / (stem + ".road.png"), mask_to_image(s.road_region, 255));
  write_png(dir / (stem + ".onroad.png"), mask_to_image(s.on_road_mask, 255));
}

}  // namespace

DatasetManifest synthesize_dataset(const SynthConfig& config, std::int64_t count,
                                   const std::filesystem::path& out_dir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "samples", ec);
  if (ec) throw IoError("synthesize_dataset: cannot create " + (out_dir / "samples").string());

  DatasetManifest manifest;
  manifest.config = config;
  manifest.count = count;
  manifest.sample_stems.resize(static_cast<std::size_t>(count));
  parallel_for(count, [&](std::int64_t i) {
    const SceneSample s = synthesize_scene(config, i);
    const std::string stem = stem_for(i);
    write_sample(out_dir / "samples", stem, s);
    manifest.sample_stems[static_cast<std::size_t>(i)] = "samples/" + stem;
  });

  json j;
  j["version"] = manifest.version;
  j["config"] = detail::synth_config_to_json(config);
  j["count"] = manifest.count;
  j["samples"] = manifest.sample_stems;
  std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("synthesize_dataset: cannot write " + (out_dir / "manifest.json").string());
  out << j.dump(2) << "\n";
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir) {
  const auto path = dataset_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw MissingInputError("dataset: missing manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("dataset: malformed manifest " + path.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  m.config = detail::synth_config_from_json(j.at("config"));
  m.count = j.at("count").get<std::int64_t>();
  m.sample_stems = j.at("samples").get<std::vector<std::string>>();
  return m;
}

SceneSample load_sample(const std::filesystem::path& dataset_dir, const std::string& stem,
                        int num_classes) {
  SceneSample s;
  const ImageU8 img = read_png(dataset_dir / (stem + ".image.png"));
  if (img.channels != 3) throw IoError("dataset: image is not RGB: " + stem);
  const int h = img.height, w = img.width;
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  s.image = Tensor<float>({3, h, w});
  for (std::int64_t i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c)
      s.image[c * hw + i] = img.pixels[static_cast<std::size_t>(i) * 3 + c] / 255.0f;
  s.class_labels = image_to_mask(read_png(dataset_dir / (stem + ".labels.png")), false);
  for (std::int64_t i = 0; i < s.class_labels.size(); ++i)
    if (s.class_labels[i] >= num_classes)
      throw IoError("dataset: label out of range in " + stem);
  s.ood_mask = image_to_mask(read_png(dataset_dir / (stem + ".ood.png")), true);
  s.road_region = image_to_mask(read_png(dataset_dir / (stem + ".road.png")), true);
  s.on_road_mask = image_to_mask(read_png(dataset_dir / (stem + ".onroad.png")), true);
  return s;
}

Dataset load_dataset(const std::filesystem::path& dataset_dir) {
  const DatasetManifest m = read_manifest(dataset_dir);
  Dataset d;
  d.config = m.config;
  d.samples.resize(m.sample_stems.size());
  parallel_for(static_cast<std::int64_t>(m.sample_stems.size()), [&](std::int64_t i) {
    d.samples[static_cast<std::size_t>(i)] =
        load_sample(dataset_dir, m.sample_stems[static_cast<std::size_t>(i)],
                    m.config.num_classes);
  });
  return d;
}

Dataset synthesize_in_memory(const SynthConfig& config, std::int64_t count,
                             std::int64_t first_index) {
  config.validate();
  Dataset d;
  d.config = config;
  d.samples.resize(static_cast<std::size_t>(count));
  parallel_for(count, [&](std::int64_t i) {
    d.samples[static_cast<std::size_t>(i)] = synthesize_scene(config, first_index + i);
  });
  return d;
}

}  // namespace sota
