#include "weedctx/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <exception>
#include <sstream>
#include <stdexcept>

namespace weedctx {

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  const std::size_t n = m.total();
  m.accuracy = n == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(n);
  if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return m;
}

Metrics metrics_from_predictions(std::span<const double> probabilities, std::span<const int> labels,
                                 double threshold) {
  if (probabilities.size() != labels.size()) throw std::invalid_argument("metrics: size mismatch");
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = probabilities[i] >= threshold;
    const bool weed = labels[i] == 1;
    if (pred && weed) ++tp;
    else if (pred) ++fp;
    else if (weed) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

template <typename T>
Metrics evaluate(const ModelParams<T>& params, std::span<const Sample> samples, double threshold) {
  const auto probs = predict(params, samples);
  std::vector<double> p(probs.begin(), probs.end());
  std::vector<int> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.label);
  return metrics_from_predictions(p, y, threshold);
}

template Metrics evaluate<float>(const ModelParams<float>&, std::span<const Sample>, double);
template Metrics evaluate<double>(const ModelParams<double>&, std::span<const Sample>, double);

int heatmap_extent(int image_extent, int cell_size, int stride) {
  if (cell_size < 1 || stride < 1) throw std::invalid_argument("heatmap: cell size and stride must be positive");
  if (image_extent < cell_size) return 0;
  return (image_extent - cell_size) / stride + 1;
}

template <typename T>
HeatMap heatmap(const ModelParams<T>& params, const RasterImage& image, const std::string& image_id, ContextMode mode,
                const ContextSpec& spec, int stride, int batch_size) {
  HeatMap map;
  map.image_id = image_id;
  map.cell_size = spec.tile_size;
  map.stride = stride;
  map.mode = mode;
  map.cols = heatmap_extent(image.width(), spec.tile_size, stride);
  map.rows = heatmap_extent(image.height(), spec.tile_size, stride);
  const std::size_t cells = static_cast<std::size_t>(map.rows) * map.cols;
  map.values.resize(cells);
  if (cells == 0) return map;

  // Chunked so a large image never holds every context window at once.
  const std::size_t chunk = static_cast<std::size_t>(std::max(batch_size, 1)) * 8;
  for (std::size_t start = 0; start < cells; start += chunk) {
    const std::size_t end = std::min(cells, start + chunk);
    std::vector<Sample> samples(end - start);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(end - start); ++k) {
      const std::size_t i = start + static_cast<std::size_t>(k);
      const int r = static_cast<int>(i / map.cols), c = static_cast<int>(i % map.cols);
      try {
        samples[k].image = extract_context(image, map.cell_rect(r, c), mode, spec);
      } catch (...) {
#pragma omp critical(heatmap_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    const auto probs = predict(params, std::span<const Sample>(samples), batch_size);
    for (std::size_t k = 0; k < probs.size(); ++k) map.values[start + k] = static_cast<double>(probs[k]);
  }
  return map;
}

template HeatMap heatmap<float>(const ModelParams<float>&, const RasterImage&, const std::string&, ContextMode,
                                const ContextSpec&, int, int);
template HeatMap heatmap<double>(const ModelParams<double>&, const RasterImage&, const std::string&, ContextMode,
                                 const ContextSpec&, int, int);

RasterImage render_overlay(const HeatMap& map, const RasterImage& base, double threshold, double alpha, Rgb tint) {
  std::vector<std::uint8_t> covered(static_cast<std::size_t>(base.width()) * base.height(), 0);
  const PixelRect bounds = base.bounds();
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      if (map.at(r, c) < threshold) continue;
      const PixelRect cell = intersect(map.cell_rect(r, c), bounds);
      for (int y = cell.y0; y < cell.y1(); ++y) {
        std::fill_n(covered.begin() + static_cast<std::ptrdiff_t>(y) * base.width() + cell.x0, cell.w, 1);
      }
    }
  }
  RasterImage out = base;
  const auto blend = [alpha](std::uint8_t v, std::uint8_t t) {
    return static_cast<std::uint8_t>(std::lround((1.0 - alpha) * v + alpha * t));
  };
  for (int y = 0; y < base.height(); ++y) {
    for (int x = 0; x < base.width(); ++x) {
      if (!covered[static_cast<std::size_t>(y) * base.width() + x]) continue;
      const Rgb p = base.pixel(x, y);
      out.set_pixel(x, y, {blend(p.r, tint.r), blend(p.g, tint.g), blend(p.b, tint.b)});
    }
  }
  return out;
}

std::pair<std::vector<int>, int> label_components(std::span<const std::uint8_t> mask, int rows, int cols) {
  if (rows < 0 || cols < 0 || mask.size() != static_cast<std::size_t>(rows) * cols) {
    throw std::invalid_argument("label_components: mask size mismatch");
  }
  std::vector<int> ids(mask.size(), -1);
  int count = 0;
  std::deque<int> queue;
  for (int start = 0; start < static_cast<int>(mask.size()); ++start) {
    if (!mask[start] || ids[start] >= 0) continue;
    ids[start] = count;
    queue.push_back(start);
    while (!queue.empty()) {
      const int cur = queue.front();
      queue.pop_front();
      const int r = cur / cols, c = cur % cols;
      const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& [nr, nc] : nbr) {
        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
        const int j = nr * cols + nc;
        if (mask[j] && ids[j] < 0) {
          ids[j] = count;
          queue.push_back(j);
        }
      }
    }
    ++count;
  }
  return {std::move(ids), count};
}

std::vector<PixelRect> detect_patches(const HeatMap& map, double threshold) {
  std::vector<std::uint8_t> mask(map.values.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = map.values[i] >= threshold ? 1 : 0;
  const auto [ids, count] = label_components(mask, map.rows, map.cols);

  std::vector<PixelRect> out(count);
  std::vector<bool> seen(count, false);
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      const int id = ids[static_cast<std::size_t>(r) * map.cols + c];
      if (id < 0) continue;
      const PixelRect cell = map.cell_rect(r, c);
      if (!seen[id]) {
        out[id] = cell;
        seen[id] = true;
        continue;
      }
      PixelRect& b = out[id];
      const int lx = std::min(b.x0, cell.x0), ly = std::min(b.y0, cell.y0);
      const int hx = std::max(b.x1(), cell.x1()), hy = std::max(b.y1(), cell.y1());
      b = {lx, ly, hx - lx, hy - ly};
    }
  }
  return out;
}

PatchMatch match_patches(std::span<const PixelRect> detections, std::span<const AnnotationBox> boxes,
                         const std::string& image_id) {
  PatchMatch m;
  std::vector<bool> used(detections.size(), false);
  for (const auto& box : boxes) {
    if (box.image_id != image_id) continue;
    bool hit = false;
    for (std::size_t d = 0; d < detections.size(); ++d) {
      if (overlaps(detections[d], box.rect)) {
        hit = true;
        used[d] = true;
      }
    }
    hit ? ++m.found : ++m.missed;
  }
  m.false_patches = static_cast<std::size_t>(std::count(used.begin(), used.end(), false));
  return m;
}

const ModeSummary& CompareReport::of(const std::string& mode) const {
  for (const auto& m : modes) {
    if (m.mode == mode) return m;
  }
  throw std::out_of_range("compare: no runs for mode " + mode);
}

std::string CompareReport::table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %5s %10s %12s %12s %14s\n", "mode", "runs", "best_epoch", "best_val_acc",
                "best_error", "mean_run_best");
  os << line;
  for (const auto& m : modes) {
    std::snprintf(line, sizeof line, "%-8s %5zu %10d %12.4f %12.4f %14.4f\n", m.mode.c_str(), m.runs, m.best_epoch,
                  m.best_mean_val_acc, m.best_error, m.mean_of_run_best);
    os << line;
  }
  return os.str();
}

std::string CompareReport::series_csv() const {
  std::ostringstream os;
  os << "epoch";
  for (const auto& m : modes) os << ',' << m.mode;
  os << '\n';
  const std::size_t n = modes.empty() ? 0 : modes.front().mean_val_acc.size();
  char buf[32];
  for (std::size_t e = 0; e < n; ++e) {
    os << e + 1;
    for (const auto& m : modes) {
      std::snprintf(buf, sizeof buf, ",%.6f", m.mean_val_acc[e]);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

CompareReport compare_runs(const std::map<std::string, std::vector<History>>& histories) {
  CompareReport report;
  std::size_t epochs = 0;
  for (const auto& [mode, runs] : histories) {
    if (runs.empty()) throw DataError("compare: mode " + mode + " has no runs");
    for (const auto& h : runs) {
      if (h.epochs.empty()) throw DataError("compare: empty history for mode " + mode);
      if (epochs == 0) epochs = h.epochs.size();
      if (h.epochs.size() != epochs) throw DataError("compare: histories differ in length");
    }
    ModeSummary s;
    s.mode = mode;
    s.runs = runs.size();
    s.mean_val_acc.assign(epochs, 0.0);
    for (const auto& h : runs) {
      for (std::size_t e = 0; e < epochs; ++e) s.mean_val_acc[e] += h.epochs[e].val_acc;
      s.mean_of_run_best += h.best_val_acc();
    }
    for (auto& v : s.mean_val_acc) v /= static_cast<double>(runs.size());
    s.mean_of_run_best /= static_cast<double>(runs.size());
    const auto best = std::max_element(s.mean_val_acc.begin(), s.mean_val_acc.end());
    s.best_epoch = static_cast<int>(best - s.mean_val_acc.begin()) + 1;
    s.best_mean_val_acc = *best;
    s.best_error = 1.0 - *best;
    report.modes.push_back(std::move(s));
  }
  return report;
}

namespace {

void draw_line(RasterImage& img, int x0, int y0, int x1, int y1, Rgb color, int thickness) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    for (int oy = -thickness / 2; oy <= thickness / 2; ++oy) {
      for (int ox = -thickness / 2; ox <= thickness / 2; ++ox) {
        const int x = x0 + ox, y = y0 + oy;
        if (x >= 0 && y >= 0 && x < img.width() && y < img.height()) img.set_pixel(x, y, color);
      }
    }
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) { err += dy; x0 += sx; }
    if (e2 <= dx) { err += dx; y0 += sy; }
  }
}

void fill_rect(RasterImage& img, const PixelRect& r, Rgb color) {
  const PixelRect c = intersect(r, img.bounds());
  for (int y = c.y0; y < c.y1(); ++y) {
    for (int x = c.x0; x < c.x1(); ++x) img.set_pixel(x, y, color);
  }
}

constexpr Rgb kPalette[] = {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {148, 103, 189}, {255, 127, 14}};

}  // namespace

RasterImage render_compare_chart(const CompareReport& report, int width, int height) {
  RasterImage img(width, height);
  fill_rect(img, img.bounds(), {255, 255, 255});
  const int left = 50, right = width - 20, top = 20, bottom = height - 40;
  if (right <= left || bottom <= top) throw std::invalid_argument("chart: too small");

  // Gridlines every 0.1 of accuracy; y axis spans [0, 1].
  for (int g = 0; g <= 10; ++g) {
    const int y = bottom - (bottom - top) * g / 10;
    draw_line(img, left, y, right, y, g % 5 == 0 ? Rgb{150, 150, 150} : Rgb{225, 225, 225}, 1);
  }
  draw_line(img, left, top, left, bottom, {0, 0, 0}, 1);
  draw_line(img, left, bottom, right, bottom, {0, 0, 0}, 1);

  for (std::size_t m = 0; m < report.modes.size(); ++m) {
    const auto& curve = report.modes[m].mean_val_acc;
    const Rgb color = kPalette[m % std::size(kPalette)];
    const auto px = [&](std::size_t e) {
      return curve.size() <= 1 ? left : left + static_cast<int>((right - left) * e / (curve.size() - 1));
    };
    const auto py = [&](double v) { return bottom - static_cast<int>(std::lround((bottom - top) * std::clamp(v, 0.0, 1.0))); };
    for (std::size_t e = 0; e + 1 < curve.size(); ++e) {
      draw_line(img, px(e), py(curve[e]), px(e + 1), py(curve[e + 1]), color, 3);
    }
    if (!curve.empty()) fill_rect(img, {px(0) - 2, py(curve[0]) - 2, 5, 5}, color);
    // Legend swatch, in mode order.
    fill_rect(img, {left + 10 + static_cast<int>(m) * 40, height - 25, 30, 10}, color);
  }
  return img;
}

}  // namespace weedctx
