#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "weedctx/dataprep.hpp"

namespace weedctx {

class UnknownTileError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct LabelProgress {
  std::size_t labeled = 0;
  std::size_t total = 0;
  std::size_t weed = 0;
  std::size_t nonweed = 0;
};

/// labels.csv plus an append-only audit log (timestamp,tile_id,label,actor).
/// Writes are serialized and land via temp-file rename; readers get
/// immutable snapshots and never block on a writer.
class LabelStore {
 public:
  struct State {
    std::vector<TileRecord> tiles;
    std::map<std::string, std::size_t> index;  // tile_id -> position in tiles
  };

  /// Loads labels_path; a missing audit log is created on first write.
  /// Throws DataError if labels.csv is unreadable or inconsistent.
  explicit LabelStore(std::string labels_path, std::string audit_path = {});

  std::shared_ptr<const State> snapshot() const;

  /// Sets (or, with nullopt, clears) a label. Repeating the current value is
  /// a no-op with no audit entry; returns whether anything changed.
  bool set_label(const std::string& tile_id, std::optional<int> label, const std::string& actor = "cli");

  std::optional<int> label_of(const std::string& tile_id) const;
  LabelProgress progress() const;
  /// First unlabeled tile in file order.
  std::optional<TileRecord> next_unlabeled() const;

  const std::string& labels_path() const { return labels_path_; }
  const std::string& audit_path() const { return audit_path_; }

 private:
  std::string labels_path_;
  std::string audit_path_;
  std::mutex write_mutex_;
  std::shared_ptr<const State> state_;
};

}  // namespace weedctx
