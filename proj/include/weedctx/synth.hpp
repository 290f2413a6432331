#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "weedctx/annotations.hpp"
#include "weedctx/dataprep.hpp"

namespace weedctx {

/// Synthetic field imagery: crop plants on a regular row lattice, weeds
/// grouped in patches where the crop failed. Crop plants and weeds share one
/// renderer and one size distribution, so a tile-sized crop cannot tell them
/// apart; the surrounding lattice (present or cleared) can.
struct SynthConfig {
  int image_w = 1800;
  int image_h = 1800;
  int tile_size = 300;
  int row_period = 300;     // spacing between crop rows
  int plant_spacing = 300;  // spacing between plants along a row
  std::uint64_t leaf_texture_seed = 7;
  int n_weeds = 4;
  int weeds_per_patch = 2;
  int patch_radius = 450;  // crop-free disk around each weed patch
  int weed_radius = 120;   // upper bound of the plant radius (crop and weed)
  double crop_dropout = 0.05;
  int corpus_size = 20;
  std::uint64_t master_seed = 1;

  /// Defaults rescaled to a different tile size (image 6 x 6 tiles).
  static SynthConfig for_tile(int tile_size);
  void validate() const;
};

struct SynthCorpus {
  std::vector<std::string> image_ids;  // generation order
  ImageSet images;
  BoxIndex boxes;  // weed boxes per image; every image has an entry
};

SynthCorpus generate_corpus(const SynthConfig& config);

/// Center of a weed box; boxes are emitted symmetric around the blob center.
inline std::pair<int, int> box_center(const PixelRect& r) { return {r.x0 + r.w / 2, r.y0 + r.h / 2}; }

/// Grid tiles labeled weed iff some box center lies in the tile (half-open).
std::vector<TileRecord> label_tiles(const ImageSizes& sizes, const BoxIndex& boxes, int tile_size);

/// Per-channel mean and variance of an image, in [0, 1] units.
std::array<double, 6> texture_stats(const RasterImage& img);

struct AmbiguityReport {
  double raw_accuracy = 0;      // texture-stat classifier on raw tiles
  double context_accuracy = 0;  // same classifier on edge-stretched context
};

/// Fits a logistic regression on texture_stats of the training samples and
/// reports accuracy on the evaluation samples, for raw and context tiles.
AmbiguityReport texture_ambiguity(std::span<const Sample> raw_train, std::span<const Sample> raw_eval,
                                  std::span<const Sample> ctx_train, std::span<const Sample> ctx_eval);

/// Accuracy of a texture-stat logistic regression fitted on `train`.
double texture_classifier_accuracy(std::span<const Sample> train, std::span<const Sample> eval);

}  // namespace weedctx
