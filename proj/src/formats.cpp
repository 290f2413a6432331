#include "weedctx/formats.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace weedctx {

namespace {

using nlohmann::json;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

template <typename T>
T parse_num(const std::string& s, const char* what) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw DataError(std::string("bad ") + what + " field '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw DataError(std::string("bad ") + what + " field '" + s + "'");
}

void check_header(const std::vector<std::string>& lines, const std::string& header, const char* file) {
  if (lines.empty() || lines.front() != header) throw DataError(std::string(file) + ": missing or wrong header");
}

void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of(",\"\n") != std::string::npos) throw DataError("invalid id '" + id + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* kLabelsHeader = "tile_id,image_id,grid_row,grid_col,origin_x,origin_y,label,jittered";
const char* kBoxesHeader = "image_id,x0,y0,w,h,source";

}  // namespace

std::string format_labels_csv(const std::vector<TileRecord>& tiles) {
  std::ostringstream os;
  os << kLabelsHeader << '\n';
  for (const auto& t : tiles) {
    check_id(t.image_id);
    os << t.tile_id() << ',' << t.image_id << ',' << t.grid_row << ',' << t.grid_col << ',' << t.origin_x << ','
       << t.origin_y << ',';
    if (t.label) os << *t.label;
    os << ',' << (t.jittered ? 1 : 0) << '\n';
  }
  return os.str();
}

std::vector<TileRecord> parse_labels_csv(const std::string& text) {
  const auto lines = lines_of(text);
  check_header(lines, kLabelsHeader, "labels.csv");
  std::vector<TileRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    if (f.size() != 8) throw DataError("labels.csv line " + std::to_string(i + 1) + ": expected 8 fields");
    TileRecord t;
    t.image_id = f[1];
    check_id(t.image_id);
    t.grid_row = parse_num<int>(f[2], "grid_row");
    t.grid_col = parse_num<int>(f[3], "grid_col");
    t.origin_x = parse_num<int>(f[4], "origin_x");
    t.origin_y = parse_num<int>(f[5], "origin_y");
    if (!f[6].empty()) {
      const int label = parse_num<int>(f[6], "label");
      if (label != 0 && label != 1) throw DataError("labels.csv: label must be 0 or 1");
      t.label = label;
    }
    const int jit = parse_num<int>(f[7], "jittered");
    if (jit != 0 && jit != 1) throw DataError("labels.csv: jittered must be 0 or 1");
    t.jittered = jit == 1;
    if (t.jittered) {
      const auto pos = f[0].rfind("_j");
      if (pos == std::string::npos) throw DataError("labels.csv: jittered tile id lacks _j suffix: " + f[0]);
      t.jitter_index = parse_num<int>(f[0].substr(pos + 2), "jitter index");
    }
    if (t.tile_id() != f[0]) throw DataError("labels.csv: tile id " + f[0] + " does not match its fields");
    out.push_back(std::move(t));
  }
  return out;
}

std::string format_splits_json(const SplitAssignment& a) {
  json j;
  j["seed"] = a.seed;
  j["ratios"] = {a.ratios.train, a.ratios.val, a.ratios.test};
  j["overrides"] = json::object();
  if (a.overrides) {
    j["overrides"] = {{"train", a.overrides->train}, {"val", a.overrides->val}, {"test", a.overrides->test}};
  }
  json assign = json::object();
  for (const auto& [id, s] : a.assignment) assign[id] = std::string(to_string(s));
  j["assignment"] = assign;
  return j.dump(2) + "\n";
}

SplitAssignment parse_splits_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    SplitAssignment a;
    a.seed = j.at("seed").get<std::uint64_t>();
    const auto& r = j.at("ratios");
    if (!r.is_array() || r.size() != 3) throw DataError("splits.json: ratios must have three entries");
    a.ratios = {r[0].get<double>(), r[1].get<double>(), r[2].get<double>()};
    const auto& o = j.value("overrides", json::object());
    if (!o.empty()) {
      a.overrides = SplitSizes{o.at("train").get<std::size_t>(), o.at("val").get<std::size_t>(),
                               o.at("test").get<std::size_t>()};
    }
    for (const auto& [id, s] : j.at("assignment").items()) a.assignment[id] = parse_split(s.get<std::string>());
    return a;
  } catch (const json::exception& e) {
    throw DataError(std::string("splits.json: ") + e.what());
  }
}

std::string format_boxes_csv(const BoxIndex& boxes) {
  std::ostringstream os;
  os << kBoxesHeader << '\n';
  for (const auto& [id, list] : boxes) {
    for (const auto& b : list) {
      check_id(b.image_id);
      check_id(b.source);
      os << b.image_id << ',' << b.rect.x0 << ',' << b.rect.y0 << ',' << b.rect.w << ',' << b.rect.h << ','
         << b.source << '\n';
    }
  }
  return os.str();
}

BoxIndex parse_boxes_csv(const std::string& text) {
  const auto lines = lines_of(text);
  check_header(lines, kBoxesHeader, "boxes.csv");
  BoxIndex out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    if (f.size() != 6) throw DataError("boxes.csv line " + std::to_string(i + 1) + ": expected 6 fields");
    AnnotationBox b;
    b.image_id = f[0];
    b.rect = {parse_num<int>(f[1], "x0"), parse_num<int>(f[2], "y0"), parse_num<int>(f[3], "w"),
              parse_num<int>(f[4], "h")};
    if (b.rect.empty()) throw DataError("boxes.csv line " + std::to_string(i + 1) + ": empty box");
    b.source = f[5];
    out[b.image_id].push_back(std::move(b));
  }
  return out;
}

std::string history_csv_header() { return "epoch,mode,run,train_loss,train_acc,val_loss,val_acc\n"; }

std::string format_history_rows(const History& h, const std::string& mode, int run) {
  check_id(mode);
  std::ostringstream os;
  for (const auto& e : h.epochs) {
    os << e.epoch << ',' << mode << ',' << run << ',' << fmt_double(e.train_loss) << ',' << fmt_double(e.train_acc)
       << ',' << fmt_double(e.val_loss) << ',' << fmt_double(e.val_acc) << '\n';
  }
  return os.str();
}

HistorySet parse_history_csv(const std::string& text) {
  const auto lines = lines_of(text);
  std::string header = history_csv_header();
  header.pop_back();
  check_header(lines, header, "history.csv");
  HistorySet out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    if (f.size() != 7) throw DataError("history.csv line " + std::to_string(i + 1) + ": expected 7 fields");
    EpochStats e;
    e.epoch = parse_num<int>(f[0], "epoch");
    const RunKey key{f[1], parse_num<int>(f[2], "run")};
    e.train_loss = parse_double(f[3], "train_loss");
    e.train_acc = parse_double(f[4], "train_acc");
    e.val_loss = parse_double(f[5], "val_loss");
    e.val_acc = parse_double(f[6], "val_acc");
    History& h = out[key];
    if (e.epoch != static_cast<int>(h.epochs.size()) + 1) {
      throw DataError("history.csv: epochs out of order for " + key.mode + " run " + std::to_string(key.run));
    }
    h.epochs.push_back(e);
  }
  for (auto& [key, h] : out) {
    h.best_epoch = 1;
    for (const auto& e : h.epochs) {
      if (e.val_acc > h.epochs[h.best_epoch - 1].val_acc) h.best_epoch = e.epoch;
    }
  }
  return out;
}

std::string format_heatmap_json(const HeatMap& map) {
  json j;
  j["image_id"] = map.image_id;
  j["mode"] = std::string(to_string(map.mode));
  j["cell_size"] = map.cell_size;
  j["stride"] = map.stride;
  j["rows"] = map.rows;
  j["cols"] = map.cols;
  j["values"] = map.values;
  return j.dump() + "\n";
}

HeatMap parse_heatmap_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    HeatMap m;
    m.image_id = j.at("image_id").get<std::string>();
    m.mode = parse_context_mode(j.at("mode").get<std::string>());
    m.cell_size = j.at("cell_size").get<int>();
    m.stride = j.at("stride").get<int>();
    m.rows = j.at("rows").get<int>();
    m.cols = j.at("cols").get<int>();
    m.values = j.at("values").get<std::vector<double>>();
    if (m.rows < 0 || m.cols < 0 || m.values.size() != static_cast<std::size_t>(m.rows) * m.cols) {
      throw DataError("heatmap.json: value count does not match grid");
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("heatmap.json: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << text;
    out.flush();
    if (!out) throw DataError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot rename onto " + path);
  }
}

}  // namespace weedctx
