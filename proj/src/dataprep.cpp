#include "weedctx/dataprep.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <numeric>

#include "weedctx/random.hpp"

namespace weedctx {

std::string_view to_string(ContextMode mode) {
  switch (mode) {
    case ContextMode::None:
      return "none";
    case ContextMode::FullStretched:
      return "full";
    case ContextMode::EdgeStretched:
      return "edge";
  }
  return "none";
}

ContextMode parse_context_mode(std::string_view name) {
  if (name == "none") return ContextMode::None;
  if (name == "full") return ContextMode::FullStretched;
  if (name == "edge") return ContextMode::EdgeStretched;
  throw DataError("unknown context mode: " + std::string(name));
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Validation:
      return "val";
    case Split::Test:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Validation;
  if (name == "test") return Split::Test;
  throw DataError("unknown split: " + std::string(name));
}

ImageSizes sizes_of(const ImageSet& images) {
  ImageSizes out;
  for (const auto& [id, img] : images) {
    out[id] = {img.width(), img.height()};
  }
  return out;
}

std::string TileRecord::tile_id() const {
  std::string id = image_id + "_r" + std::to_string(grid_row) + "_c" + std::to_string(grid_col);
  if (jittered) {
    id += "_j" + std::to_string(jitter_index);
  }
  return id;
}

// ---------------------------------------------------------------- splits

Split SplitAssignment::of(const std::string& image_id) const {
  auto it = assignment.find(image_id);
  if (it == assignment.end()) {
    throw DataError("image has no split assignment: " + image_id);
  }
  return it->second;
}

SplitSizes SplitAssignment::sizes() const {
  SplitSizes s;
  for (const auto& [id, split] : assignment) {
    switch (split) {
      case Split::Train:
        ++s.train;
        break;
      case Split::Validation:
        ++s.val;
        break;
      case Split::Test:
        ++s.test;
        break;
    }
  }
  return s;
}

SplitAssignment assign_splits(std::span<const std::string> image_ids, const SplitRatios& ratios,
                              std::uint64_t seed, std::optional<SplitSizes> overrides) {
  const std::size_t n = image_ids.size();
  if (n == 0) {
    throw DataError("cannot split an empty image set");
  }
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw DataError("split ratios must be positive and sum to 1");
  }
  std::vector<std::string> ids(image_ids.begin(), image_ids.end());
  {
    auto sorted = ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw DataError("duplicate image id in split input");
    }
  }

  SplitSizes sizes;
  if (overrides) {
    if (overrides->train + overrides->val + overrides->test != n) {
      throw DataError("split size overrides must sum to the number of images");
    }
    sizes = *overrides;
  } else {
    // The epsilon keeps exact products such as 3 * (1/3) from flooring to 0.
    sizes.train = static_cast<std::size_t>(std::floor(n * ratios.train + 1e-9));
    sizes.val = static_cast<std::size_t>(std::floor(n * ratios.val + 1e-9));
    sizes.val = std::min(sizes.val, n - sizes.train);
    sizes.test = n - sizes.train - sizes.val;
  }

  Rng rng = Rng::derive(seed, {hash_key("assign_splits")});
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(ids[i], ids[rng.below(i + 1)]);
  }

  SplitAssignment out;
  out.seed = seed;
  out.ratios = ratios;
  out.overrides = overrides;
  for (std::size_t i = 0; i < n; ++i) {
    Split s = i < sizes.train ? Split::Train : (i < sizes.train + sizes.val ? Split::Validation : Split::Test);
    out.assignment.emplace(ids[i], s);
  }
  return out;
}

// ---------------------------------------------------------------- tiling

std::vector<TileRecord> grid_tiles(const std::string& image_id, ImageSize size, int tile_size) {
  if (tile_size < 1) {
    throw DataError("tile size must be positive");
  }
  if (size.width < tile_size || size.height < tile_size) {
    throw DataError("image " + image_id + " is smaller than one tile");
  }
  const int cols = size.width / tile_size;
  const int rows = size.height / tile_size;
  std::vector<TileRecord> tiles;
  tiles.reserve(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      TileRecord t;
      t.image_id = image_id;
      t.grid_row = r;
      t.grid_col = c;
      t.origin_x = c * tile_size;
      t.origin_y = r * tile_size;
      tiles.push_back(std::move(t));
    }
  }
  return tiles;
}

std::vector<TileRecord> grid_tiles(const std::string& image_id, const RasterImage& img, int tile_size) {
  return grid_tiles(image_id, ImageSize{img.width(), img.height()}, tile_size);
}

// ---------------------------------------------------------------- context

PixelRect available_window(const PixelRect& tile_rect, int border, ImageSize image) {
  const PixelRect window{tile_rect.x0 - border, tile_rect.y0 - border, tile_rect.w + 2 * border,
                         tile_rect.h + 2 * border};
  return intersect(window, {0, 0, image.width, image.height});
}

namespace {

struct Band {
  int nominal_start;  // canvas coordinate
  int nominal_len;
  int src_start;  // image coordinate of the available strip
  int src_len;    // 0 when the strip lies entirely outside the image
};

// Bands before / inside / after the tile along one axis.
std::array<Band, 3> make_bands(int tile_start, int tile_len, int border, int image_len) {
  const int before_start = std::max(0, tile_start - border);
  const int after_end = std::min(image_len, tile_start + tile_len + border);
  return {{
      {0, border, before_start, tile_start - before_start},
      {border, tile_len, tile_start, tile_len},
      {border + tile_len, border, tile_start + tile_len, after_end - (tile_start + tile_len)},
  }};
}

void replicate_column(RasterImage& canvas, int from_x, int to_x0, int to_len, int y0, int h) {
  for (int y = y0; y < y0 + h; ++y) {
    const Rgb v = canvas.pixel(from_x, y);
    for (int x = to_x0; x < to_x0 + to_len; ++x) {
      canvas.set_pixel(x, y, v);
    }
  }
}

void replicate_row(RasterImage& canvas, int from_y, int to_y0, int to_len, int x0, int w) {
  for (int y = to_y0; y < to_y0 + to_len; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      canvas.set_pixel(x, y, canvas.pixel(x, from_y));
    }
  }
}

RasterImage edge_stretched_canvas(const RasterImage& img, const PixelRect& tile, int border) {
  const int side = tile.w + 2 * border;
  RasterImage canvas(side, tile.h + 2 * border);
  const auto cols = make_bands(tile.x0, tile.w, border, img.width());
  const auto rows = make_bands(tile.y0, tile.h, border, img.height());

  auto fill_region = [&](int i, int j) {
    const Band& cx = cols[i];
    const Band& ry = rows[j];
    if (cx.nominal_len == 0 || ry.nominal_len == 0) {
      return;
    }
    if (cx.src_len > 0 && ry.src_len > 0) {
      const RasterImage strip = crop(img, {cx.src_start, ry.src_start, cx.src_len, ry.src_len});
      paste_into(canvas, resample(strip, cx.nominal_len, ry.nominal_len), cx.nominal_start, ry.nominal_start);
      return;
    }
    if (ry.src_len == 0) {
      // Missing row band: copy the nearest row of the middle band downward/upward.
      const int from_y = j == 0 ? rows[1].nominal_start : rows[1].nominal_start + rows[1].nominal_len - 1;
      replicate_row(canvas, from_y, ry.nominal_start, ry.nominal_len, cx.nominal_start, cx.nominal_len);
      return;
    }
    // Missing column band: copy the nearest column of the middle column band.
    const int from_x = i == 0 ? cols[1].nominal_start : cols[1].nominal_start + cols[1].nominal_len - 1;
    replicate_column(canvas, from_x, cx.nominal_start, cx.nominal_len, ry.nominal_start, ry.nominal_len);
  };

  // Order matters: the middle row band and middle column band are complete
  // before any corner replicates from them.
  fill_region(1, 1);
  fill_region(0, 1);
  fill_region(2, 1);
  fill_region(1, 0);
  fill_region(1, 2);
  fill_region(0, 0);
  fill_region(2, 0);
  fill_region(0, 2);
  fill_region(2, 2);
  return canvas;
}

}  // namespace

RasterImage extract_context(const RasterImage& img, const PixelRect& tile_rect, ContextMode mode,
                            const ContextSpec& spec) {
  if (tile_rect.empty()) {
    throw DegenerateRectError("tile rect has zero extent");
  }
  if (tile_rect.x0 < 0 || tile_rect.y0 < 0 || tile_rect.x1() > img.width() || tile_rect.y1() > img.height()) {
    throw BoundsError("tile rect outside image bounds");
  }
  if (spec.border < 0 || spec.output_size < 1) {
    throw DataError("invalid context spec");
  }
  switch (mode) {
    case ContextMode::None:
      return crop(img, tile_rect);
    case ContextMode::FullStretched: {
      const PixelRect avail = available_window(tile_rect, spec.border, {img.width(), img.height()});
      return resample(crop(img, avail), spec.output_size, spec.output_size);
    }
    case ContextMode::EdgeStretched:
      return resample(edge_stretched_canvas(img, tile_rect, spec.border), spec.output_size, spec.output_size);
  }
  throw DataError("unhandled context mode");
}

RasterImage extract_context(const RasterImage& img, const TileRecord& tile, ContextMode mode,
                            const ContextSpec& spec) {
  return extract_context(img, tile.rect(spec.tile_size), mode, spec);
}

// ---------------------------------------------------------------- jitter

std::vector<TileRecord> jitter_balance(std::span<const TileRecord> tiles, const ImageSizes& sizes,
                                       std::uint64_t seed, const JitterConfig& config, int tile_size) {
  std::size_t counts[2] = {0, 0};
  for (const auto& t : tiles) {
    if (!t.label || (*t.label != 0 && *t.label != 1)) {
      throw DataError("jitter_balance requires binary labels on every tile: " + t.tile_id());
    }
    if (!sizes.contains(t.image_id)) {
      throw DataError("tile references an unknown image: " + t.image_id);
    }
    ++counts[*t.label];
  }
  std::vector<TileRecord> out(tiles.begin(), tiles.end());
  if (tiles.empty()) {
    return out;
  }
  const int minority = counts[1] <= counts[0] ? 1 : 0;
  const std::size_t majority_count = counts[1 - minority];
  std::size_t minority_count = counts[minority];
  auto balanced = [&] {
    return static_cast<double>(minority_count) >= config.target_ratio * static_cast<double>(majority_count);
  };
  if (balanced()) {
    return out;
  }
  std::vector<std::size_t> sources;
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    if (*tiles[i].label == minority && !tiles[i].jittered) {
      sources.push_back(i);
    }
  }
  if (sources.empty()) {
    throw DataError("no minority-class tiles available to jitter");
  }

  // Continue numbering past jittered copies already present in the input.
  std::map<std::string, int> next_index;
  for (const auto& t : tiles) {
    if (!t.jittered) continue;
    TileRecord base = t;
    base.jittered = false;
    base.jitter_index = 0;
    int& n = next_index[base.tile_id()];
    n = std::max(n, t.jitter_index);
  }
  for (std::uint64_t draw = 0; !balanced(); ++draw) {
    Rng rng = Rng::derive(seed, {hash_key("jitter"), draw});
    const TileRecord& src = tiles[sources[rng.below(sources.size())]];
    const int dx = static_cast<int>(rng.between(-config.max_offset, config.max_offset));
    const int dy = static_cast<int>(rng.between(-config.max_offset, config.max_offset));
    const ImageSize size = sizes.at(src.image_id);

    TileRecord j = src;
    j.jittered = true;
    j.jitter_index = ++next_index[src.tile_id()];
    j.origin_x = std::clamp(src.origin_x + dx, 0, size.width - tile_size);
    j.origin_y = std::clamp(src.origin_y + dy, 0, size.height - tile_size);
    out.push_back(std::move(j));
    ++minority_count;
  }
  return out;
}

// ---------------------------------------------------------------- datasets

std::vector<TileRecord>& DatasetPlan::of(Split s) {
  return s == Split::Train ? train : (s == Split::Validation ? val : test);
}

const std::vector<TileRecord>& DatasetPlan::of(Split s) const {
  return s == Split::Train ? train : (s == Split::Validation ? val : test);
}

DatasetPlan plan_dataset(std::span<const TileRecord> tiles, const ImageSizes& sizes,
                         const SplitAssignment& split, std::uint64_t seed, const JitterConfig& jitter,
                         int tile_size) {
  DatasetPlan grouped;
  for (const auto& t : tiles) {
    if (!t.label) {
      throw DataError("unlabeled tile in dataset input: " + t.tile_id());
    }
    grouped.of(split.of(t.image_id)).push_back(t);
  }
  DatasetPlan plan;
  for (Split s : {Split::Train, Split::Validation, Split::Test}) {
    const auto& in = grouped.of(s);
    if (in.empty()) {
      continue;
    }
    const std::uint64_t split_seed = Rng::derive(seed, {hash_key("split-jitter"), static_cast<std::uint64_t>(s)}).next();
    plan.of(s) = jitter_balance(in, sizes, split_seed, jitter, tile_size);
  }
  return plan;
}

std::vector<Sample> materialize(std::span<const TileRecord> tiles, const ImageSet& images, ContextMode mode,
                                const ContextSpec& spec) {
  for (const auto& t : tiles) {
    if (!images.contains(t.image_id)) {
      throw DataError("tile references an unknown image: " + t.image_id);
    }
  }
  std::vector<Sample> out(tiles.size());
  const long long n = static_cast<long long>(tiles.size());
  // Exceptions must not leave the parallel region; keep the first and rethrow.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (long long i = 0; i < n; ++i) {
    const TileRecord& t = tiles[i];
    out[i].tile = t;
    out[i].label = t.label.value_or(0);
    try {
      out[i].image = extract_context(images.at(t.image_id), t, mode, spec);
    } catch (...) {
#pragma omp critical(materialize_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

Dataset build_dataset(std::span<const TileRecord> tiles, const ImageSet& images, ContextMode mode,
                      const ContextSpec& spec, const SplitAssignment& split, std::uint64_t seed,
                      const JitterConfig& jitter) {
  const DatasetPlan plan = plan_dataset(tiles, sizes_of(images), split, seed, jitter, spec.tile_size);
  Dataset ds;
  ds.train = materialize(plan.train, images, mode, spec);
  ds.val = materialize(plan.val, images, mode, spec);
  ds.test = materialize(plan.test, images, mode, spec);
  return ds;
}

}  // namespace weedctx
