#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "weedctx/random.hpp"
#include "weedctx/raster.hpp"

namespace testing_support {

inline weedctx::RasterImage random_image(int w, int h, std::uint64_t seed) {
  weedctx::Rng rng(seed);
  weedctx::RasterImage img(w, h);
  for (auto& b : img.data()) b = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

/// Mean of each k x k block, rounded half up, computed in floating point.
inline weedctx::RasterImage block_mean_oracle(const weedctx::RasterImage& img, int k) {
  weedctx::RasterImage out(img.width() / k, img.height() / k);
  for (int j = 0; j < out.height(); ++j) {
    for (int i = 0; i < out.width(); ++i) {
      for (int c = 0; c < 3; ++c) {
        double sum = 0;
        for (int y = 0; y < k; ++y) {
          for (int x = 0; x < k; ++x) sum += img.at(i * k + x, j * k + y, c);
        }
        out.at(i, j, c) = static_cast<std::uint8_t>(std::floor(sum / (k * k) + 0.5));
      }
    }
  }
  return out;
}

// Canvas of the bordered window when every border strip is either complete or
// absent: the stretch is then 1:1 and absence means clamp-to-edge.
inline weedctx::RasterImage clamped_canvas(const weedctx::RasterImage& img, const weedctx::PixelRect& tile, int border) {
  weedctx::RasterImage canvas(tile.w + 2 * border, tile.h + 2 * border);
  for (int y = 0; y < canvas.height(); ++y) {
    for (int x = 0; x < canvas.width(); ++x) {
      const int sx = std::clamp(tile.x0 - border + x, 0, img.width() - 1);
      const int sy = std::clamp(tile.y0 - border + y, 0, img.height() - 1);
      canvas.set_pixel(x, y, img.pixel(sx, sy));
    }
  }
  return canvas;
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("weedctx_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& name = {}) const { return name.empty() ? path_.string() : (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
