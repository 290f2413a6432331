#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weedctx/annotations.hpp"
#include "weedctx/dataprep.hpp"
#include "weedctx/net.hpp"
#include "weedctx/train.hpp"

namespace weedctx {

// ---------------------------------------------------------------- metrics

struct Metrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0;
  std::optional<double> precision;  // absent when tp + fp == 0
  std::optional<double> recall;     // absent when tp + fn == 0

  std::size_t total() const { return tp + fp + tn + fn; }
};

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

/// Weed is the positive class; p >= threshold predicts weed.
Metrics metrics_from_predictions(std::span<const double> probabilities, std::span<const int> labels,
                                 double threshold = 0.5);

template <typename T>
Metrics evaluate(const ModelParams<T>& params, std::span<const Sample> samples, double threshold = 0.5);

// ---------------------------------------------------------------- heat maps

struct HeatMap {
  std::string image_id;
  int cell_size = 300;
  int stride = 300;
  int cols = 0;
  int rows = 0;
  ContextMode mode = ContextMode::None;
  std::vector<double> values;  // row-major, rows x cols

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * cols + col]; }
  /// Image-space window of a cell.
  PixelRect cell_rect(int row, int col) const { return {col * stride, row * stride, cell_size, cell_size}; }
};

/// floor((extent - cell) / stride) + 1 windows per axis.
int heatmap_extent(int image_extent, int cell_size, int stride);

/// Slides a tile-sized window over the image; each cell is the predicted weed
/// probability of the context built around that window.
template <typename T>
HeatMap heatmap(const ModelParams<T>& params, const RasterImage& image, const std::string& image_id, ContextMode mode,
                const ContextSpec& spec, int stride = 300, int batch_size = 32);

inline constexpr Rgb kOverlayPurple{128, 0, 128};

/// Tints every pixel covered by an above-threshold cell (once, even where
/// windows overlap) toward purple.
RasterImage render_overlay(const HeatMap& map, const RasterImage& base, double threshold = 0.5, double alpha = 0.5,
                           Rgb tint = kOverlayPurple);

// ---------------------------------------------------------------- patches

/// 4-connected components of cells with p >= threshold, as pixel bounding
/// rects, in order of each component's first cell in row-major order.
std::vector<PixelRect> detect_patches(const HeatMap& map, double threshold = 0.5);

/// Connected components of a boolean grid; returns a component id per cell
/// (-1 for background) and the component count.
std::pair<std::vector<int>, int> label_components(std::span<const std::uint8_t> mask, int rows, int cols);

struct PatchMatch {
  std::size_t found = 0;
  std::size_t missed = 0;
  std::size_t false_patches = 0;

  friend bool operator==(const PatchMatch&, const PatchMatch&) = default;
};

/// A box is found when any detection overlaps it with nonzero area; a
/// detection that overlaps no box is a false patch.
PatchMatch match_patches(std::span<const PixelRect> detections, std::span<const AnnotationBox> boxes,
                         const std::string& image_id);

// ---------------------------------------------------------------- run comparison

struct ModeSummary {
  std::string mode;
  std::size_t runs = 0;
  std::vector<double> mean_val_acc;  // per epoch, averaged over runs
  int best_epoch = 0;                // 1-based argmax of mean_val_acc
  double best_mean_val_acc = 0;      // mean curve at best_epoch
  double best_error = 0;             // 1 - best_mean_val_acc
  double mean_of_run_best = 0;       // average over runs of each run's best val accuracy
};

struct CompareReport {
  std::vector<ModeSummary> modes;

  const ModeSummary& of(const std::string& mode) const;
  std::string table() const;
  /// epoch,<mode>... rows of the mean curves.
  std::string series_csv() const;
};

/// Histories grouped by mode name. All histories must have the same length.
CompareReport compare_runs(const std::map<std::string, std::vector<History>>& histories);

/// Line chart of the mean validation-accuracy curves.
RasterImage render_compare_chart(const CompareReport& report, int width = 640, int height = 400);

}  // namespace weedctx
