#include "weedctx/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "weedctx/random.hpp"

namespace weedctx {

SynthConfig SynthConfig::for_tile(int tile_size) {
  SynthConfig c;
  c.tile_size = tile_size;
  c.image_w = 6 * tile_size;
  c.image_h = 6 * tile_size;
  c.row_period = tile_size;
  c.plant_spacing = tile_size;
  c.patch_radius = tile_size * 3 / 2;
  c.weed_radius = std::max(1, tile_size * 2 / 5);
  return c;
}

void SynthConfig::validate() const {
  if (tile_size < 1) throw DataError("synth: tile size must be positive");
  if (image_w < 3 * tile_size || image_h < 3 * tile_size) {
    throw DataError("synth: images must span at least 3 tiles per side");
  }
  if (row_period < 1 || plant_spacing < 1) throw DataError("synth: row period and plant spacing must be positive");
  if (weed_radius < 1 || 2 * weed_radius >= row_period) {
    throw DataError("synth: weed radius must be positive and below half the row period");
  }
  if (n_weeds < 0 || weeds_per_patch < 1) throw DataError("synth: invalid weed counts");
  if (patch_radius < 0) throw DataError("synth: patch radius must be nonnegative");
  if (crop_dropout < 0 || crop_dropout >= 1) throw DataError("synth: crop dropout must lie in [0, 1)");
  if (corpus_size < 1) throw DataError("synth: corpus size must be positive");
}

namespace {

struct Plant {
  double x;
  double y;
  double radius;
  std::uint64_t shape_key;
};

// Uniform in [-1, 1) from a coordinate hash.
double hash_noise(std::uint64_t seed, int x, int y) {
  const std::uint64_t h = mix64(seed ^ mix64((static_cast<std::uint64_t>(static_cast<std::uint32_t>(y)) << 32) |
                                             static_cast<std::uint32_t>(x)));
  return static_cast<double>(h >> 11) * 0x1.0p-52 - 1.0;
}

// Bilinear value noise on a coarse lattice.
double value_noise(std::uint64_t seed, double x, double y, double cell) {
  const double gx = x / cell, gy = y / cell;
  const int x0 = static_cast<int>(std::floor(gx)), y0 = static_cast<int>(std::floor(gy));
  const double fx = gx - x0, fy = gy - y0;
  const double a = hash_noise(seed, x0, y0), b = hash_noise(seed, x0 + 1, y0);
  const double c = hash_noise(seed, x0, y0 + 1), d = hash_noise(seed, x0 + 1, y0 + 1);
  return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
}

std::uint8_t to_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void paint_soil(RasterImage& img, std::uint64_t seed, int cell) {
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double low = 14.0 * value_noise(seed, x, y, cell);
      const double grain = 10.0 * hash_noise(seed + 1, x, y);
      img.set_pixel(x, y, {to_u8(118 + low + grain), to_u8(92 + low * 0.8 + grain), to_u8(66 + low * 0.6 + grain)});
    }
  }
}

// Rosette of elongated leaves. Crop and weed use this same renderer and the
// same texture field, keyed by absolute pixel position.
void paint_plant(RasterImage& img, const Plant& p, std::uint64_t texture_seed) {
  Rng shape(p.shape_key);
  const int leaves = 5 + static_cast<int>(shape.below(3));
  const double base = shape.uniform(0, 2 * std::numbers::pi);
  struct Leaf {
    double cx, cy, cos_t, sin_t, a, b;
  };
  std::vector<Leaf> ls;
  for (int i = 0; i < leaves; ++i) {
    const double t = base + 2 * std::numbers::pi * i / leaves + shape.uniform(-0.3, 0.3);
    const double len = p.radius * shape.uniform(0.8, 1.0);
    ls.push_back({p.x + 0.5 * len * std::cos(t), p.y + 0.5 * len * std::sin(t), std::cos(t), std::sin(t), 0.5 * len,
                  0.3 * len});
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(p.x - p.radius)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(p.x + p.radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(p.y - p.radius)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(p.y + p.radius)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      for (const Leaf& l : ls) {
        const double dx = x + 0.5 - l.cx, dy = y + 0.5 - l.cy;
        const double u = (dx * l.cos_t + dy * l.sin_t) / l.a;
        const double v = (-dx * l.sin_t + dy * l.cos_t) / l.b;
        if (u * u + v * v <= 1.0) {
          const double n = 22.0 * hash_noise(texture_seed, x, y);
          const double vein = 18.0 * (1.0 - std::min(1.0, std::abs(v) * 2.5));
          img.set_pixel(x, y, {to_u8(52 + 0.4 * n), to_u8(128 + n + vein), to_u8(42 + 0.3 * n)});
          break;
        }
      }
    }
  }
}

struct ImageLayout {
  std::vector<Plant> crops;
  std::vector<Plant> weeds;
  std::vector<AnnotationBox> boxes;
};

ImageLayout layout_image(const SynthConfig& c, const std::string& id, std::uint64_t image_seed) {
  Rng rng(image_seed);
  ImageLayout out;
  const double r_max = c.weed_radius;
  auto plant_radius = [&] { return r_max * rng.uniform(0.6, 1.0); };

  const int n_patches = c.n_weeds == 0 ? 0 : (c.n_weeds + c.weeds_per_patch - 1) / c.weeds_per_patch;
  std::vector<std::pair<double, double>> patches;
  for (int p = 0; p < n_patches; ++p) {
    patches.emplace_back(rng.uniform(r_max, c.image_w - r_max), rng.uniform(r_max, c.image_h - r_max));
  }
  // Weeds sit inside their patch, far enough from the rim that no crop plant
  // outside the cleared disk can touch them.
  const double spread = std::max(0.0, c.patch_radius - 2.0 * r_max);
  for (int k = 0; k < c.n_weeds; ++k) {
    const auto [px, py] = patches[k % n_patches];
    const double radius = plant_radius();
    const int half = static_cast<int>(std::ceil(radius));
    int cx = 0, cy = 0;
    for (int attempt = 0;; ++attempt) {
      const double ang = rng.uniform(0, 2 * std::numbers::pi);
      const double dist = spread * std::sqrt(rng.uniform());
      cx = static_cast<int>(std::lround(px + dist * std::cos(ang)));
      cy = static_cast<int>(std::lround(py + dist * std::sin(ang)));
      const bool inside = cx >= half && cy >= half && cx + half < c.image_w && cy + half < c.image_h;
      if (inside) break;
      if (attempt > 64) {
        cx = std::clamp(cx, half, c.image_w - 1 - half);
        cy = std::clamp(cy, half, c.image_h - 1 - half);
        break;
      }
    }
    out.weeds.push_back({cx + 0.5, cy + 0.5, radius, rng.next()});
    out.boxes.push_back({id, {cx - half, cy - half, 2 * half + 1, 2 * half + 1}, "ground-truth"});
  }

  const double phase_x = rng.uniform(0, c.row_period);
  const double phase_y = rng.uniform(0, c.plant_spacing);
  const double wobble = 0.1 * c.row_period;
  for (double x = phase_x - c.row_period; x < c.image_w + c.row_period; x += c.row_period) {
    for (double y = phase_y - c.plant_spacing; y < c.image_h + c.plant_spacing; y += c.plant_spacing) {
      // Draw every variate unconditionally so the stream layout is fixed.
      const double jx = rng.uniform(-wobble, wobble);
      const double jy = rng.uniform(-wobble, wobble);
      const double radius = plant_radius();
      const bool dropped = rng.uniform() < c.crop_dropout;
      const std::uint64_t key = rng.next();
      const Plant plant{x + jx, y + jy, radius, key};
      if (dropped) continue;
      bool cleared = false;
      for (const auto& [px, py] : patches) {
        cleared = cleared || std::hypot(plant.x - px, plant.y - py) < c.patch_radius;
      }
      if (!cleared) out.crops.push_back(plant);
    }
  }
  return out;
}

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& config) {
  config.validate();
  SynthCorpus corpus;
  std::vector<RasterImage> images(config.corpus_size);
  std::vector<std::vector<AnnotationBox>> boxes(config.corpus_size);
  for (int i = 0; i < config.corpus_size; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img%04d", i);
    corpus.image_ids.emplace_back(name);
  }
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < config.corpus_size; ++i) {
    const std::uint64_t seed = Rng::derive(config.master_seed, {hash_key("synth-image"), static_cast<std::uint64_t>(i)}).next();
    const ImageLayout layout = layout_image(config, corpus.image_ids[i], seed);
    RasterImage img(config.image_w, config.image_h);
    paint_soil(img, mix64(seed ^ 0x5011), std::max(4, config.tile_size / 2));
    for (const Plant& p : layout.crops) paint_plant(img, p, config.leaf_texture_seed);
    for (const Plant& p : layout.weeds) paint_plant(img, p, config.leaf_texture_seed);
    images[i] = std::move(img);
    boxes[i] = layout.boxes;
  }
  for (int i = 0; i < config.corpus_size; ++i) {
    corpus.images.emplace(corpus.image_ids[i], std::move(images[i]));
    corpus.boxes.emplace(corpus.image_ids[i], std::move(boxes[i]));
  }
  return corpus;
}

std::vector<TileRecord> label_tiles(const ImageSizes& sizes, const BoxIndex& boxes, int tile_size) {
  std::vector<TileRecord> out;
  for (const auto& [id, size] : sizes) {
    auto it = boxes.find(id);
    if (it == boxes.end()) {
      throw DataError("no ground truth for image " + id);
    }
    auto tiles = grid_tiles(id, size, tile_size);
    for (auto& t : tiles) {
      const PixelRect r = t.rect(tile_size);
      int label = 0;
      for (const auto& b : it->second) {
        const auto [cx, cy] = box_center(b.rect);
        if (r.contains(cx, cy)) {
          label = 1;
          break;
        }
      }
      t.label = label;
    }
    out.insert(out.end(), tiles.begin(), tiles.end());
  }
  return out;
}

std::array<double, 6> texture_stats(const RasterImage& img) {
  std::array<double, 6> f{};
  const auto px = img.data();
  const double n = static_cast<double>(img.width()) * img.height();
  for (int c = 0; c < 3; ++c) {
    double sum = 0, sq = 0;
    for (std::size_t i = c; i < px.size(); i += 3) {
      const double v = px[i] / 255.0;
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n;
    f[c] = mean;
    f[3 + c] = std::max(0.0, sq / n - mean * mean);
  }
  return f;
}

double texture_classifier_accuracy(std::span<const Sample> train, std::span<const Sample> eval) {
  constexpr int kF = 6;
  std::vector<std::array<double, kF>> xs;
  for (const auto& s : train) xs.push_back(texture_stats(s.image));
  std::array<double, kF> mu{}, sd{};
  for (const auto& x : xs)
    for (int j = 0; j < kF; ++j) mu[j] += x[j] / xs.size();
  for (const auto& x : xs)
    for (int j = 0; j < kF; ++j) sd[j] += (x[j] - mu[j]) * (x[j] - mu[j]) / xs.size();
  for (double& v : sd) v = std::sqrt(v) + 1e-12;
  auto standardize = [&](std::array<double, kF> x) {
    for (int j = 0; j < kF; ++j) x[j] = (x[j] - mu[j]) / sd[j];
    return x;
  };
  for (auto& x : xs) x = standardize(x);

  std::array<double, kF> w{};
  double b = 0;
  for (int it = 0; it < 2000; ++it) {
    std::array<double, kF> gw{};
    double gb = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      double z = b;
      for (int j = 0; j < kF; ++j) z += w[j] * xs[i][j];
      const double err = 1.0 / (1.0 + std::exp(-z)) - train[i].label;
      for (int j = 0; j < kF; ++j) gw[j] += err * xs[i][j];
      gb += err;
    }
    for (int j = 0; j < kF; ++j) w[j] -= 0.5 * gw[j] / xs.size();
    b -= 0.5 * gb / xs.size();
  }
  std::size_t correct = 0;
  for (const auto& s : eval) {
    const auto x = standardize(texture_stats(s.image));
    double z = b;
    for (int j = 0; j < kF; ++j) z += w[j] * x[j];
    correct += (z >= 0 ? 1 : 0) == s.label;
  }
  return eval.empty() ? 0.0 : static_cast<double>(correct) / eval.size();
}

AmbiguityReport texture_ambiguity(std::span<const Sample> raw_train, std::span<const Sample> raw_eval,
                                  std::span<const Sample> ctx_train, std::span<const Sample> ctx_eval) {
  return {texture_classifier_accuracy(raw_train, raw_eval), texture_classifier_accuracy(ctx_train, ctx_eval)};
}

}  // namespace weedctx
