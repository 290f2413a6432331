#include "weedctx/label_store.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>

#include "weedctx/formats.hpp"

namespace weedctx {

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[80];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

}  // namespace

LabelStore::LabelStore(std::string labels_path, std::string audit_path)
    : labels_path_(std::move(labels_path)),
      audit_path_(audit_path.empty() ? labels_path_ + ".audit.csv" : std::move(audit_path)) {
  auto state = std::make_shared<State>();
  state->tiles = parse_labels_csv(read_text_file(labels_path_));
  for (std::size_t i = 0; i < state->tiles.size(); ++i) {
    if (!state->index.emplace(state->tiles[i].tile_id(), i).second) {
      throw DataError("labels.csv: duplicate tile id " + state->tiles[i].tile_id());
    }
  }
  state_ = std::move(state);
}

std::shared_ptr<const LabelStore::State> LabelStore::snapshot() const { return std::atomic_load(&state_); }

bool LabelStore::set_label(const std::string& tile_id, std::optional<int> label, const std::string& actor) {
  if (label && *label != 0 && *label != 1) throw DataError("label must be 0 or 1");
  if (actor.find_first_of(",\n") != std::string::npos) throw DataError("invalid actor name");
  std::lock_guard lock(write_mutex_);
  const auto current = snapshot();
  const auto it = current->index.find(tile_id);
  if (it == current->index.end()) throw UnknownTileError("unknown tile " + tile_id);
  if (current->tiles[it->second].label == label) return false;

  auto next = std::make_shared<State>(*current);
  next->tiles[it->second].label = label;
  write_text_file_atomic(labels_path_, format_labels_csv(next->tiles));

  const bool fresh = !std::ifstream(audit_path_).good();
  std::ofstream audit(audit_path_, std::ios::app);
  if (!audit) throw DataError("cannot append to " + audit_path_);
  if (fresh) audit << "timestamp,tile_id,label,actor\n";
  audit << utc_timestamp() << ',' << tile_id << ',' << (label ? std::to_string(*label) : std::string()) << ','
        << actor << '\n';
  audit.flush();

  std::atomic_store(&state_, std::shared_ptr<const State>(std::move(next)));
  return true;
}

std::optional<int> LabelStore::label_of(const std::string& tile_id) const {
  const auto s = snapshot();
  const auto it = s->index.find(tile_id);
  if (it == s->index.end()) throw UnknownTileError("unknown tile " + tile_id);
  return s->tiles[it->second].label;
}

LabelProgress LabelStore::progress() const {
  const auto s = snapshot();
  LabelProgress p;
  p.total = s->tiles.size();
  for (const auto& t : s->tiles) {
    if (!t.label) continue;
    ++p.labeled;
    *t.label == 1 ? ++p.weed : ++p.nonweed;
  }
  return p;
}

std::optional<TileRecord> LabelStore::next_unlabeled() const {
  const auto s = snapshot();
  for (const auto& t : s->tiles) {
    if (!t.label) return t;
  }
  return std::nullopt;
}

}  // namespace weedctx
