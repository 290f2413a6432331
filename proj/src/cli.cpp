#include "weedctx/cli.hpp"

#include <csignal>
#include <filesystem>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "weedctx/checkpoint.hpp"
#include "weedctx/corpus_io.hpp"
#include "weedctx/formats.hpp"
#include "weedctx/gradcheck.hpp"
#include "weedctx/labeler_service.hpp"
#include "weedctx/pipeline.hpp"
#include "weedctx/synth.hpp"
#include "weedctx/train.hpp"

namespace fs = std::filesystem;

namespace weedctx {

namespace {

using nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Files created by a command; removed again unless the command commits.
class Outputs {
 public:
  explicit Outputs(const std::string& dir) : dir_(dir) {
    if (dir_.empty()) throw UsageError("--out is required");
    if (fs::exists(dir_) && !fs::is_directory(dir_)) throw UsageError("--out exists and is not a directory");
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_);
      created_dir_ = true;
    }
  }
  Outputs(const Outputs&) = delete;
  Outputs& operator=(const Outputs&) = delete;

  ~Outputs() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) {
      if (fs::is_directory(*it, ec)) {
        if (fs::is_empty(*it, ec)) fs::remove(*it, ec);
      } else {
        fs::remove(*it, ec);
        fs::remove(it->string() + ".tmp", ec);
      }
    }
    if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
  }

  std::string file(const std::string& name) {
    const fs::path p = dir_ / name;
    created_.push_back(p);
    return p.string();
  }

  std::string subdir(const std::string& name) {
    const fs::path p = dir_ / name;
    if (!fs::exists(p)) {
      fs::create_directories(p);
      created_.push_back(p);
    }
    return p.string();
  }

  const fs::path& dir() const { return dir_; }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  bool created_dir_ = false;
  bool committed_ = false;
  std::vector<fs::path> created_;
};

json scalar_json(const std::string& s) {
  if (s.empty()) return s;
  try {
    std::size_t used = 0;
    if (s.find_first_of(".eE") == std::string::npos) {
      const long long v = std::stoll(s, &used);
      if (used == s.size()) return v;
    } else {
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    }
  } catch (const std::exception&) {
  }
  if (s == "true") return true;
  if (s == "false") return false;
  return s;
}

// Every option of the subcommand with its effective value.
json options_json(const CLI::App& sub) {
  json j = json::object();
  j["command"] = sub.get_name();
  for (const CLI::Option* opt : sub.get_options()) {
    std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames().front();
    if (name == "help") continue;
    std::vector<std::string> values = opt->count() > 0 ? opt->reduced_results() : std::vector<std::string>{};
    if (values.empty() && !opt->get_default_str().empty()) values = {opt->get_default_str()};
    if (values.empty()) {
      j[name] = opt->get_type_size() == 0 ? json(false) : json(nullptr);
    } else if (values.size() == 1 && opt->get_items_expected_max() <= 1) {
      j[name] = opt->get_type_size() == 0 ? json(opt->count() > 0) : scalar_json(values.front());
    } else {
      json arr = json::array();
      for (const auto& v : values) arr.push_back(scalar_json(v));
      j[name] = arr;
    }
  }
  return j;
}

json resolved(json config, const ContextSpec& spec) {
  config["tile-size"] = spec.tile_size;
  config["border"] = spec.border;
  config["output-size"] = spec.output_size;
  return config;
}

json resolved(json config, const ContextSpec& spec, const JitterConfig& jitter) {
  config = resolved(std::move(config), spec);
  config["max-offset"] = jitter.max_offset;
  config["target-ratio"] = jitter.target_ratio;
  return config;
}

void write_resolved(Outputs& out, const json& config) {
  write_text_file_atomic(out.file("resolved-config.json"), config.dump(2) + "\n");
}

// ------------------------------------------------------------ shared options

struct GeometryOpts {
  int tile = 300;
  int border = -1;  // defaults to the tile size
  int output = -1;  // defaults to the tile size

  void add(CLI::App* sub) {
    sub->add_option("--tile-size", tile, "Tile edge in pixels")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--border", border, "Context border in pixels (default: tile size)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--output-size", output, "Context output edge in pixels (default: tile size)")
        ->check(CLI::PositiveNumber);
  }
  ContextSpec spec() const { return {tile, border < 0 ? tile : border, output < 0 ? tile : output}; }
};

struct JitterOpts {
  int max_offset = -1;  // defaults to a third of the tile
  double target_ratio = 0.95;

  void add(CLI::App* sub) {
    sub->add_option("--max-offset", max_offset, "Jitter offset bound in pixels (default: tile/3)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--target-ratio", target_ratio, "Minority/majority ratio at which balancing stops")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
  }
  JitterConfig config(int tile) const { return {max_offset < 0 ? tile / 3 : max_offset, target_ratio}; }
};

struct DataOpts {
  std::string corpus;
  std::string splits;
  std::string labels;  // default <corpus>/labels.csv

  void add(CLI::App* sub) {
    sub->add_option("--corpus", corpus, "Corpus directory")->required();
    sub->add_option("--splits", splits, "splits.json")->required();
    sub->add_option("--labels", labels, "labels.csv (default: <corpus>/labels.csv)");
  }
  std::string labels_path() const { return labels.empty() ? (fs::path(corpus) / "labels.csv").string() : labels; }
};

std::vector<TileRecord> labeled_tiles(const std::string& path, std::ostream& err) {
  auto tiles = parse_labels_csv(read_text_file(path));
  const auto before = tiles.size();
  std::erase_if(tiles, [](const TileRecord& t) { return !t.label.has_value(); });
  if (tiles.size() != before) err << "skipping " << before - tiles.size() << " unlabeled tiles\n";
  if (tiles.empty()) throw DataError("no labeled tiles in " + path);
  return tiles;
}

ImageSet images_for(const std::string& corpus, const std::vector<TileRecord>& tiles) {
  std::vector<std::string> ids;
  for (const auto& t : tiles) ids.push_back(t.image_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return load_corpus_images(corpus, ids);
}

json metrics_json(const Metrics& m) {
  json j{{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}, {"total", m.total()}, {"accuracy", m.accuracy}};
  j["precision"] = m.precision ? json(*m.precision) : json(nullptr);
  j["recall"] = m.recall ? json(*m.recall) : json(nullptr);
  return j;
}

// ------------------------------------------------------------ synth

struct SynthOpts {
  std::uint64_t seed = 0;
  std::string out;
  int tile = 300;
  std::optional<int> image_size, corpus_size, n_weeds, weeds_per_patch, patch_radius, weed_radius;
  std::optional<int> row_period, plant_spacing;
  std::optional<double> crop_dropout;
  std::optional<std::uint64_t> texture_seed;
};

int cmd_synth(const SynthOpts& o, json config, std::ostream& out) {
  SynthConfig c = SynthConfig::for_tile(o.tile);
  if (o.image_size) c.image_w = c.image_h = *o.image_size;
  if (o.corpus_size) c.corpus_size = *o.corpus_size;
  if (o.n_weeds) c.n_weeds = *o.n_weeds;
  if (o.weeds_per_patch) c.weeds_per_patch = *o.weeds_per_patch;
  if (o.patch_radius) c.patch_radius = *o.patch_radius;
  if (o.weed_radius) c.weed_radius = *o.weed_radius;
  if (o.row_period) c.row_period = *o.row_period;
  if (o.plant_spacing) c.plant_spacing = *o.plant_spacing;
  if (o.crop_dropout) c.crop_dropout = *o.crop_dropout;
  if (o.texture_seed) c.leaf_texture_seed = *o.texture_seed;
  c.master_seed = o.seed;
  try {
    c.validate();
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }

  Outputs dir(o.out);
  config["synth"] = {{"image_w", c.image_w},
                     {"image_h", c.image_h},
                     {"tile_size", c.tile_size},
                     {"row_period", c.row_period},
                     {"plant_spacing", c.plant_spacing},
                     {"leaf_texture_seed", c.leaf_texture_seed},
                     {"n_weeds", c.n_weeds},
                     {"weeds_per_patch", c.weeds_per_patch},
                     {"patch_radius", c.patch_radius},
                     {"weed_radius", c.weed_radius},
                     {"crop_dropout", c.crop_dropout},
                     {"corpus_size", c.corpus_size},
                     {"master_seed", c.master_seed}};
  write_resolved(dir, config);

  const SynthCorpus corpus = generate_corpus(c);
  dir.subdir("images");
  for (const auto& id : corpus.image_ids) dir.file("images/" + id + ".png");
  dir.file("boxes.csv");
  dir.file("labels.csv");
  write_corpus(dir.dir().string(), corpus, c.tile_size);

  const auto tiles = label_tiles(sizes_of(corpus.images), corpus.boxes, c.tile_size);
  const auto weeds = std::count_if(tiles.begin(), tiles.end(), [](const TileRecord& t) { return *t.label == 1; });
  out << "wrote " << corpus.image_ids.size() << " images, " << tiles.size() << " tiles (" << weeds << " weed) to "
      << o.out << "\n";
  dir.commit();
  return kExitOk;
}

// ------------------------------------------------------------ split

struct SplitOpts {
  std::uint64_t seed = 0;
  std::string out;
  std::string corpus;
  std::vector<double> ratios{0.70, 0.15, 0.15};
  std::vector<std::size_t> sizes;
};

int cmd_split(const SplitOpts& o, const json& config, std::ostream& out) {
  const auto ids = list_corpus_images(o.corpus);
  std::optional<SplitSizes> overrides;
  if (!o.sizes.empty()) overrides = SplitSizes{o.sizes[0], o.sizes[1], o.sizes[2]};
  SplitAssignment a;
  try {
    a = assign_splits(ids, {o.ratios[0], o.ratios[1], o.ratios[2]}, o.seed, overrides);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  Outputs dir(o.out);
  write_resolved(dir, config);
  write_text_file_atomic(dir.file("splits.json"), format_splits_json(a));
  const auto s = a.sizes();
  out << "train " << s.train << " val " << s.val << " test " << s.test << "\n";
  dir.commit();
  return kExitOk;
}

// ------------------------------------------------------------ tile

struct TileOpts {
  std::uint64_t seed = 0;
  std::string out;
  std::string corpus;
  int tile = 300;
};

int cmd_tile(const TileOpts& o, const json& config, std::ostream& out) {
  const auto images = load_corpus_images(o.corpus);
  // Existing labels carry over by tile id.
  std::map<std::string, int> known;
  const fs::path labels = fs::path(o.corpus) / "labels.csv";
  if (fs::exists(labels)) {
    for (const auto& t : parse_labels_csv(read_text_file(labels.string()))) {
      if (t.label) known[t.tile_id()] = *t.label;
    }
  }
  std::vector<TileRecord> tiles;
  for (const auto& [id, img] : images) {
    for (auto t : grid_tiles(id, img, o.tile)) {
      const auto it = known.find(t.tile_id());
      if (it != known.end()) t.label = it->second;
      tiles.push_back(std::move(t));
    }
  }
  Outputs dir(o.out);
  write_resolved(dir, config);
  write_text_file_atomic(dir.file("labels.csv"), format_labels_csv(tiles));
  out << "wrote " << tiles.size() << " tiles\n";
  dir.commit();
  return kExitOk;
}

// ------------------------------------------------------------ balance

struct BalanceOpts {
  std::uint64_t seed = 0;
  std::string out;
  DataOpts data;
  int tile = 300;
  JitterOpts jitter;
};

int cmd_balance(const BalanceOpts& o, const json& config, std::ostream& out, std::ostream& err) {
  const auto tiles = labeled_tiles(o.data.labels_path(), err);
  const auto split = parse_splits_json(read_text_file(o.data.splits));
  const auto images = images_for(o.data.corpus, tiles);
  const JitterConfig jitter = o.jitter.config(o.tile);
  const auto plan = plan_dataset(tiles, sizes_of(images), split, o.seed, jitter, o.tile);

  std::vector<TileRecord> all;
  for (const Split s : {Split::Train, Split::Validation, Split::Test}) {
    const auto& part = plan.of(s);
    all.insert(all.end(), part.begin(), part.end());
    const auto weeds = std::count_if(part.begin(), part.end(), [](const TileRecord& t) { return *t.label == 1; });
    out << to_string(s) << ": " << part.size() << " tiles, " << weeds << " weed\n";
  }
  Outputs dir(o.out);
  json cfg = config;
  cfg["max-offset"] = jitter.max_offset;
  write_resolved(dir, cfg);
  write_text_file_atomic(dir.file("labels.csv"), format_labels_csv(all));
  dir.commit();
  return kExitOk;
}

// ------------------------------------------------------------ contextify

struct ContextifyOpts {
  std::uint64_t seed = 0;
  std::string out;
  std::string corpus;
  std::string labels;
  std::string mode = "edge";
  GeometryOpts geometry;
};

int cmd_contextify(const ContextifyOpts& o, const json& config, std::ostream& out) {
  const std::string labels = o.labels.empty() ? (fs::path(o.corpus) / "labels.csv").string() : o.labels;
  const auto tiles = parse_labels_csv(read_text_file(labels));
  const auto images = images_for(o.corpus, tiles);
  const ContextMode mode = parse_context_mode(o.mode);
  const ContextSpec spec = o.geometry.spec();

  Outputs dir(o.out);
  write_resolved(dir, resolved(config, spec));
  const auto samples = materialize(tiles, images, mode, spec);
  dir.subdir("tiles");
  for (const auto& s : samples) {
    write_image(dir.file("tiles/" + s.tile.tile_id() + "_" + std::string(to_string(mode)) + ".png"), s.image);
  }
  out << "wrote " << samples.size() << " context tiles\n";
  dir.commit();
  return kExitOk;
}

// ------------------------------------------------------------ train

struct TrainOpts {
  std::uint64_t seed = 0;
  std::string out;
  DataOpts data;
  GeometryOpts geometry;
  JitterOpts jitter;
  std::string mode = "edge";
  TrainingConfig training;
  std::string precision = "f32";
  int run = 0;
};

int cmd_train(const TrainOpts& o, const json& config, std::ostream& out, std::ostream& err) {
  TrainingConfig tc = o.training;
  tc.seed = o.seed;
  tc.precision = o.precision == "f64" ? Precision::F64 : Precision::F32;
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const ContextMode mode = parse_context_mode(o.mode);
  const ContextSpec spec = o.geometry.spec();
  const NetworkSpec net = NetworkSpec::standard(spec.output_size);
  try {
    net.validate();
  } catch (const ShapeError& e) {
    throw UsageError(e.what());
  }

  const auto tiles = labeled_tiles(o.data.labels_path(), err);
  const auto split = parse_splits_json(read_text_file(o.data.splits));
  const auto images = images_for(o.data.corpus, tiles);

  const JitterConfig jitter = o.jitter.config(spec.tile_size);
  Outputs dir(o.out);
  write_resolved(dir, resolved(config, spec, jitter));
  const Dataset data = build_dataset(tiles, images, mode, spec, split, o.seed, jitter);
  if (data.train.empty() || data.val.empty()) throw DataError("train and validation splits must both be non-empty");
  err << "train " << data.train.size() << " val " << data.val.size() << " samples\n";

  const auto report = [&err](const EpochStats& e) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %d lr %.5g train_loss %.4f train_acc %.4f val_loss %.4f val_acc %.4f\n",
                  e.epoch, e.lr, e.train_loss, e.train_acc, e.val_loss, e.val_acc);
    err << line;
  };

  History history;
  ModelParams<float> best;
  Metrics val_metrics;
  if (tc.precision == Precision::F64) {
    auto r = train<double>(net, data.train, data.val, tc, report);
    history = r.history;
    val_metrics = evaluate(r.best, std::span<const Sample>(data.val));
    best = cast_params<float>(r.best);
  } else {
    auto r = train<float>(net, data.train, data.val, tc, report);
    history = r.history;
    val_metrics = evaluate(r.best, std::span<const Sample>(data.val));
    best = std::move(r.best);
  }

  write_text_file_atomic(dir.file("history.csv"),
                         history_csv_header() + format_history_rows(history, std::string(to_string(mode)), o.run));
  write_checkpoint(dir.file("model.wdcx"), best);
  json summary{{"mode", to_string(mode)},
               {"run", o.run},
               {"best_epoch", history.best_epoch},
               {"best_val_acc", history.best_val_acc()},
               {"val_metrics", metrics_json(val_metrics)}};
  write_text_file_atomic(dir.file("summary.json"), summary.dump(2) + "\n");
  out << "best epoch " << history.best_epoch << " val_acc " << history.best_val_acc() << "\n";
  dir.commit();
  return kExitOk;
}

// ------------------------------------------------------------ eval

struct EvalOpts {
  std::uint64_t seed = 0;
  std::string out;
  std::string checkpoint;
  DataOpts data;
  GeometryOpts geometry;
  JitterOpts jitter;
  std::string mode = "edge";
  std::string split = "test";
  double threshold = 0.5;
};

int cmd_eval(const EvalOpts& o, const json& config, std::ostream& out, std::ostream& err) {
  const auto params = read_checkpoint(o.checkpoint);
  ContextSpec spec = o.geometry.spec();
  if (o.geometry.output >= 0 && o.geometry.output != params.spec.height) {
    throw UsageError("--output-size does not match the checkpoint input size");
  }
  spec.output_size = params.spec.height;
  const ContextMode mode = parse_context_mode(o.mode);
  const Split which = parse_split(o.split);

  const auto tiles = labeled_tiles(o.data.labels_path(), err);
  const auto split = parse_splits_json(read_text_file(o.data.splits));
  const auto images = images_for(o.data.corpus, tiles);
  const JitterConfig jitter = o.jitter.config(spec.tile_size);
  const auto plan = plan_dataset(tiles, sizes_of(images), split, o.seed, jitter, spec.tile_size);
  const auto samples = materialize(plan.of(which), images, mode, spec);
  if (samples.empty()) throw DataError("split " + o.split + " has no tiles");

  Outputs dir(o.out);
  write_resolved(dir, resolved(config, spec, jitter));
  const Metrics m = evaluate(params, std::span<const Sample>(samples), o.threshold);
  json j = metrics_json(m);
  j["split"] = o.split;
  j["mode"] = to_string(mode);
  j["threshold"] = o.threshold;
  write_text_file_atomic(dir.file("metrics.json"), j.dump(2) + "\n");
  out << j.dump(2) << "\n";
  dir.commit();
  return kExitOk;
}

// ------------------------------------------------------------ heatmap

struct HeatmapOpts {
  std::uint64_t seed = 0;
  std::string out;
  std::string checkpoint;
  std::string corpus;
  std::string image;
  GeometryOpts geometry;
  std::string mode = "edge";
  int stride = -1;  // defaults to the tile size
  double threshold = 0.5;
  double alpha = 0.5;
};

int cmd_heatmap(const HeatmapOpts& o, const json& config, std::ostream& out) {
  const auto params = read_checkpoint(o.checkpoint);
  ContextSpec spec = o.geometry.spec();
  spec.output_size = params.spec.height;
  const ContextMode mode = parse_context_mode(o.mode);
  const int stride = o.stride < 0 ? spec.tile_size : o.stride;
  const auto images = load_corpus_images(o.corpus, {o.image});
  const RasterImage& img = images.at(o.image);

  Outputs dir(o.out);
  json cfg = resolved(config, spec);
  cfg["stride"] = stride;
  write_resolved(dir, cfg);
  const HeatMap map = heatmap(params, img, o.image, mode, spec, stride);
  write_text_file_atomic(dir.file("heatmap.json"), format_heatmap_json(map));
  write_image(dir.file("overlay.png"), render_overlay(map, img, o.threshold, o.alpha));

  const auto patches = detect_patches(map, o.threshold);
  json j;
  j["threshold"] = o.threshold;
  j["patches"] = json::array();
  for (const auto& p : patches) j["patches"].push_back({{"x0", p.x0}, {"y0", p.y0}, {"w", p.w}, {"h", p.h}});
  const fs::path boxes_path = fs::path(o.corpus) / "boxes.csv";
  if (fs::exists(boxes_path)) {
    const BoxIndex boxes = parse_boxes_csv(read_text_file(boxes_path.string()));
    const auto it = boxes.find(o.image);
    const std::vector<AnnotationBox> none;
    const PatchMatch pm = match_patches(patches, it == boxes.end() ? none : it->second, o.image);
    j["match"] = {{"found", pm.found}, {"missed", pm.missed}, {"false_patches", pm.false_patches}};
  }
  write_text_file_atomic(dir.file("patches.json"), j.dump(2) + "\n");
  out << map.rows << "x" << map.cols << " cells, " << patches.size() << " patches\n";
  dir.commit();
  return kExitOk;
}

// ------------------------------------------------------------ gradcheck

struct GradcheckOpts {
  std::uint64_t seed = 0;
  std::string out;
  double step = 1e-5;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradcheckOpts& o, const json& config, std::ostream& out) {
  Outputs dir(o.out);
  write_resolved(dir, config);
  GradCheckOptions opts;
  opts.step = o.step;
  opts.seed = o.seed;
  const auto report = gradient_check(NetworkSpec::reduced(), opts);
  json j;
  j["max_rel_error"] = report.max_rel_error;
  j["checked"] = report.checked;
  j["pass"] = report.max_rel_error < o.tolerance;
  j["groups"] = json::array();
  char line[160];
  for (const auto& g : report.groups) {
    j["groups"].push_back({{"name", g.name},
                           {"count", g.count},
                           {"max_rel_error", g.max_rel_error},
                           {"max_abs_error", g.max_abs_error},
                           {"refined", g.refined}});
    std::snprintf(line, sizeof line, "%-14s %6zu  max_rel %.3e  max_abs %.3e  refined %zu\n", g.name.c_str(),
                  g.count, g.max_rel_error, g.max_abs_error, g.refined);
    out << line;
  }
  write_text_file_atomic(dir.file("gradcheck.json"), j.dump(2) + "\n");
  out << "max relative error " << report.max_rel_error << (j["pass"].get<bool>() ? " (pass)\n" : " (FAIL)\n");
  dir.commit();
  return kExitOk;
}

// ------------------------------------------------------------ compare

struct CompareOpts {
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> runs;
};

int cmd_compare(const CompareOpts& o, const json& config, std::ostream& out) {
  std::map<std::string, std::vector<History>> grouped;
  for (const auto& run : o.runs) {
    const fs::path path = fs::path(run) / "history.csv";
    if (!fs::exists(path)) throw DataError("no history.csv in " + run);
    for (auto& [key, h] : parse_history_csv(read_text_file(path.string()))) grouped[key.mode].push_back(std::move(h));
  }
  const CompareReport report = compare_runs(grouped);
  Outputs dir(o.out);
  write_resolved(dir, config);
  write_text_file_atomic(dir.file("compare.txt"), report.table());
  write_text_file_atomic(dir.file("compare.csv"), report.series_csv());
  write_image(dir.file("compare.png"), render_compare_chart(report));
  out << report.table();
  dir.commit();
  return kExitOk;
}

// ------------------------------------------------------------ serve

struct ServeOpts {
  std::uint64_t seed = 0;
  std::string corpus;
  std::string labels;
  std::string host = "127.0.0.1";
  int port = 8080;
  GeometryOpts geometry;
};

httplib::Server* g_server = nullptr;

int cmd_serve(const ServeOpts& o, const json& config, std::ostream& out) {
  const std::string labels = o.labels.empty() ? (fs::path(o.corpus) / "labels.csv").string() : o.labels;
  LabelStore store(labels);
  const auto snap = store.snapshot();
  std::vector<TileRecord> tiles = snap->tiles;
  const ImageSet images = images_for(o.corpus, tiles);
  LabelerService service(images, store, o.geometry.spec());
  write_text_file_atomic((fs::path(labels).parent_path() / "serve-resolved-config.json").string(),
                         resolved(config, o.geometry.spec()).dump(2) + "\n");

  httplib::Server server;
  service.mount(server);
  if (!server.bind_to_port(o.host, o.port)) throw DataError("cannot bind " + o.host + ":" + std::to_string(o.port));
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  out << "serving " << tiles.size() << " tiles on http://" << o.host << ":" << o.port << "\n" << std::flush;
  server.listen_after_bind();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-augmented weed tile classification"};
  app.name("weedctx");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  const auto add_seed_out = [](CLI::App* sub, std::uint64_t& seed, std::string& outdir) {
    sub->add_option("--seed", seed, "Seed for every random choice")->required();
    sub->add_option("--out", outdir, "Output directory")->required();
  };
  const auto add_mode = [](CLI::App* sub, std::string& mode) {
    sub->add_option("--mode", mode, "Context mode")->check(CLI::IsMember({"none", "full", "edge"}));
  };

  SynthOpts synth;
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic field corpus");
  add_seed_out(s_synth, synth.seed, synth.out);
  s_synth->add_option("--tile-size", synth.tile)->check(CLI::PositiveNumber);
  s_synth->add_option("--image-size", synth.image_size, "Square image edge (default: 6 tiles)");
  s_synth->add_option("--corpus-size", synth.corpus_size);
  s_synth->add_option("--n-weeds", synth.n_weeds, "Weeds per image");
  s_synth->add_option("--weeds-per-patch", synth.weeds_per_patch);
  s_synth->add_option("--patch-radius", synth.patch_radius);
  s_synth->add_option("--weed-radius", synth.weed_radius);
  s_synth->add_option("--row-period", synth.row_period);
  s_synth->add_option("--plant-spacing", synth.plant_spacing);
  s_synth->add_option("--crop-dropout", synth.crop_dropout);
  s_synth->add_option("--texture-seed", synth.texture_seed);

  SplitOpts split;
  auto* s_split = app.add_subcommand("split", "Assign corpus images to train/val/test");
  add_seed_out(s_split, split.seed, split.out);
  s_split->add_option("--corpus", split.corpus)->required();
  s_split->add_option("--ratios", split.ratios, "train val test fractions")->expected(3);
  s_split->add_option("--sizes", split.sizes, "Explicit train val test image counts")->expected(3);

  TileOpts tile;
  auto* s_tile = app.add_subcommand("tile", "Grid-tile every corpus image into labels.csv");
  add_seed_out(s_tile, tile.seed, tile.out);
  s_tile->add_option("--corpus", tile.corpus)->required();
  s_tile->add_option("--tile-size", tile.tile)->check(CLI::PositiveNumber);

  BalanceOpts balance;
  auto* s_balance = app.add_subcommand("balance", "Jitter-balance each split");
  add_seed_out(s_balance, balance.seed, balance.out);
  balance.data.add(s_balance);
  s_balance->add_option("--tile-size", balance.tile)->check(CLI::PositiveNumber);
  balance.jitter.add(s_balance);

  ContextifyOpts ctx;
  auto* s_ctx = app.add_subcommand("contextify", "Write context tiles as PNG files");
  add_seed_out(s_ctx, ctx.seed, ctx.out);
  s_ctx->add_option("--corpus", ctx.corpus)->required();
  s_ctx->add_option("--labels", ctx.labels, "labels.csv (default: <corpus>/labels.csv)");
  add_mode(s_ctx, ctx.mode);
  ctx.geometry.add(s_ctx);

  TrainOpts tr;
  auto* s_train = app.add_subcommand("train", "Train the tile classifier");
  add_seed_out(s_train, tr.seed, tr.out);
  tr.data.add(s_train);
  tr.geometry.add(s_train);
  tr.jitter.add(s_train);
  add_mode(s_train, tr.mode);
  s_train->add_option("--epochs", tr.training.epochs);
  s_train->add_option("--lr", tr.training.learning_rate);
  s_train->add_option("--decay", tr.training.decay);
  s_train->add_option("--batch-size", tr.training.batch_size);
  s_train->add_option("--precision", tr.precision)->check(CLI::IsMember({"f32", "f64"}));
  s_train->add_option("--run", tr.run, "Run index recorded in history.csv");

  EvalOpts ev;
  auto* s_eval = app.add_subcommand("eval", "Tile-level metrics of a checkpoint");
  add_seed_out(s_eval, ev.seed, ev.out);
  s_eval->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
  ev.data.add(s_eval);
  ev.geometry.add(s_eval);
  ev.jitter.add(s_eval);
  add_mode(s_eval, ev.mode);
  s_eval->add_option("--split", ev.split)->check(CLI::IsMember({"train", "val", "test"}));
  s_eval->add_option("--threshold", ev.threshold)->check(CLI::Range(0.0, 1.0));

  HeatmapOpts hm;
  auto* s_hm = app.add_subcommand("heatmap", "Sliding-window weed probability map and overlay");
  add_seed_out(s_hm, hm.seed, hm.out);
  s_hm->add_option("--checkpoint", hm.checkpoint)->required()->check(CLI::ExistingFile);
  s_hm->add_option("--corpus", hm.corpus)->required();
  s_hm->add_option("--image", hm.image, "Image id")->required();
  hm.geometry.add(s_hm);
  add_mode(s_hm, hm.mode);
  s_hm->add_option("--stride", hm.stride, "Window stride (default: tile size)")->check(CLI::PositiveNumber);
  s_hm->add_option("--threshold", hm.threshold)->check(CLI::Range(0.0, 1.0));
  s_hm->add_option("--alpha", hm.alpha)->check(CLI::Range(0.0, 1.0));

  GradcheckOpts gc;
  auto* s_gc = app.add_subcommand("gradcheck", "Finite-difference check of the reduced network");
  add_seed_out(s_gc, gc.seed, gc.out);
  s_gc->add_option("--step", gc.step)->check(CLI::PositiveNumber);
  s_gc->add_option("--tolerance", gc.tolerance)->check(CLI::PositiveNumber);

  CompareOpts cmp;
  auto* s_cmp = app.add_subcommand("compare", "Average validation curves per mode across runs");
  add_seed_out(s_cmp, cmp.seed, cmp.out);
  s_cmp->add_option("runs", cmp.runs, "Run directories containing history.csv")->required();

  ServeOpts sv;
  auto* s_serve = app.add_subcommand("serve", "Serve the labeling endpoints");
  s_serve->add_option("--seed", sv.seed)->required();
  s_serve->add_option("--corpus", sv.corpus)->required();
  s_serve->add_option("--labels", sv.labels, "labels.csv (default: <corpus>/labels.csv)");
  s_serve->add_option("--host", sv.host);
  s_serve->add_option("--port", sv.port)->check(CLI::Range(1, 65535));
  sv.geometry.add(s_serve);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (!app.get_subcommands().empty() && e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      out << app.get_subcommands().front()->help();
      return kExitOk;
    }
    err << "weedctx: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const json config = options_json(*sub);
  try {
    if (sub == s_synth) return cmd_synth(synth, config, out);
    if (sub == s_split) return cmd_split(split, config, out);
    if (sub == s_tile) return cmd_tile(tile, config, out);
    if (sub == s_balance) return cmd_balance(balance, config, out, err);
    if (sub == s_ctx) return cmd_contextify(ctx, config, out);
    if (sub == s_train) return cmd_train(tr, config, out, err);
    if (sub == s_eval) return cmd_eval(ev, config, out, err);
    if (sub == s_hm) return cmd_heatmap(hm, config, out);
    if (sub == s_gc) return cmd_gradcheck(gc, config, out);
    if (sub == s_cmp) return cmd_compare(cmp, config, out);
    if (sub == s_serve) return cmd_serve(sv, config, out);
  } catch (const UsageError& e) {
    err << "weedctx " << sub->get_name() << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "weedctx " << sub->get_name() << ": " << e.what() << "\n";
    return kExitData;
  }
  err << "weedctx: unknown command\n";
  return kExitUsage;
}

}  // namespace weedctx
