#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "weedctx/raster.hpp"

namespace weedctx {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ContextMode { None, FullStretched, EdgeStretched };

/// "none" | "full" | "edge".
std::string_view to_string(ContextMode mode);
ContextMode parse_context_mode(std::string_view name);

struct ContextSpec {
  int tile_size = 300;
  int border = 300;
  int output_size = 300;
};

struct ImageSize {
  int width = 0;
  int height = 0;
};

using ImageSizes = std::map<std::string, ImageSize>;
using ImageSet = std::map<std::string, RasterImage>;

ImageSizes sizes_of(const ImageSet& images);

struct TileRecord {
  std::string image_id;
  int grid_row = 0;
  int grid_col = 0;
  int origin_x = 0;
  int origin_y = 0;
  std::optional<int> label;  // 1 = weed, 0 = nonweed
  bool jittered = false;
  int jitter_index = 0;  // n in the _j<n> suffix, 1-based for jittered tiles

  /// `<image_id>_r<row>_c<col>`, plus `_j<n>` for jittered tiles.
  std::string tile_id() const;
  PixelRect rect(int tile_size) const { return {origin_x, origin_y, tile_size, tile_size}; }

  friend bool operator==(const TileRecord&, const TileRecord&) = default;
};

// ---------------------------------------------------------------- splits

enum class Split { Train, Validation, Test };

/// "train" | "val" | "test".
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct SplitRatios {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

struct SplitAssignment {
  std::uint64_t seed = 0;
  SplitRatios ratios;
  std::optional<SplitSizes> overrides;
  std::map<std::string, Split> assignment;

  Split of(const std::string& image_id) const;
  SplitSizes sizes() const;
};

/// Seeded shuffle of ids, then the first floor(n*train) go to train, the next
/// floor(n*val) to validation, the rest to test. `overrides` replaces the
/// floor rule with explicit sizes that must sum to the id count.
SplitAssignment assign_splits(std::span<const std::string> image_ids, const SplitRatios& ratios,
                              std::uint64_t seed, std::optional<SplitSizes> overrides = std::nullopt);

// ---------------------------------------------------------------- tiling

/// One record per full grid cell; right/bottom remainders are dropped.
std::vector<TileRecord> grid_tiles(const std::string& image_id, ImageSize size, int tile_size = 300);
std::vector<TileRecord> grid_tiles(const std::string& image_id, const RasterImage& img, int tile_size = 300);

// ---------------------------------------------------------------- context

/// Context window for a tile at `tile_rect` (must lie inside img).
///   None           crop of the tile itself, no resize.
///   FullStretched  whatever part of the bordered window exists, resized to
///                  output_size (non-uniform near image edges).
///   EdgeStretched  3x3 canvas of bands (b, t, b): the tile verbatim in the
///                  middle, each border band stretched from its available
///                  strip to nominal size, zero-width bands filled by
///                  clamp-to-edge replication; then resized to output_size.
RasterImage extract_context(const RasterImage& img, const PixelRect& tile_rect, ContextMode mode,
                            const ContextSpec& spec);
RasterImage extract_context(const RasterImage& img, const TileRecord& tile, ContextMode mode,
                            const ContextSpec& spec);

/// Rect covered by the bordered window clipped to the image.
PixelRect available_window(const PixelRect& tile_rect, int border, ImageSize image);

// ---------------------------------------------------------------- jitter

struct JitterConfig {
  int max_offset = 100;
  double target_ratio = 0.95;
};

/// Appends jittered copies of minority-class tiles until
/// minority/majority >= target_ratio. Draw k uses its own keyed stream, so
/// the result depends only on (tiles, sizes, seed, config).
std::vector<TileRecord> jitter_balance(std::span<const TileRecord> tiles, const ImageSizes& sizes,
                                       std::uint64_t seed, const JitterConfig& config = {},
                                       int tile_size = 300);

// ---------------------------------------------------------------- datasets

struct DatasetPlan {
  std::vector<TileRecord> train;
  std::vector<TileRecord> val;
  std::vector<TileRecord> test;

  std::vector<TileRecord>& of(Split s);
  const std::vector<TileRecord>& of(Split s) const;
};

/// Mode-independent part of dataset construction: route tiles by their
/// image's split, then jitter-balance each split with its own derived seed.
DatasetPlan plan_dataset(std::span<const TileRecord> tiles, const ImageSizes& sizes,
                         const SplitAssignment& split, std::uint64_t seed, const JitterConfig& jitter,
                         int tile_size);

struct Sample {
  TileRecord tile;
  RasterImage image;
  int label = 0;
};

/// Context extraction for every planned tile; parallel over tiles, output in
/// input order.
std::vector<Sample> materialize(std::span<const TileRecord> tiles, const ImageSet& images, ContextMode mode,
                                const ContextSpec& spec);

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

Dataset build_dataset(std::span<const TileRecord> tiles, const ImageSet& images, ContextMode mode,
                      const ContextSpec& spec, const SplitAssignment& split, std::uint64_t seed,
                      const JitterConfig& jitter);

}  // namespace weedctx
