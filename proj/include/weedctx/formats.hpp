#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "weedctx/annotations.hpp"
#include "weedctx/dataprep.hpp"
#include "weedctx/pipeline.hpp"
#include "weedctx/train.hpp"

namespace weedctx {

// labels.csv: tile_id,image_id,grid_row,grid_col,origin_x,origin_y,label,jittered
// An unlabeled tile has an empty label field.
std::string format_labels_csv(const std::vector<TileRecord>& tiles);
std::vector<TileRecord> parse_labels_csv(const std::string& text);

// splits.json
std::string format_splits_json(const SplitAssignment& a);
SplitAssignment parse_splits_json(const std::string& text);

// boxes.csv: image_id,x0,y0,w,h,source
std::string format_boxes_csv(const BoxIndex& boxes);
BoxIndex parse_boxes_csv(const std::string& text);

// history.csv: epoch,mode,run,train_loss,train_acc,val_loss,val_acc
struct RunKey {
  std::string mode;
  int run = 0;
  auto operator<=>(const RunKey&) const = default;
};
using HistorySet = std::map<RunKey, History>;

std::string history_csv_header();
std::string format_history_rows(const History& h, const std::string& mode, int run);
/// Rows may interleave runs; each run's epochs must be 1..n in order. The
/// learning rate is not stored, so it reads back as 0.
HistorySet parse_history_csv(const std::string& text);

// heatmap.json
std::string format_heatmap_json(const HeatMap& map);
HeatMap parse_heatmap_json(const std::string& text);

std::string read_text_file(const std::string& path);
/// Writes to `<path>.tmp` and renames over path.
void write_text_file_atomic(const std::string& path, const std::string& text);

}  // namespace weedctx
