#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace weedctx {

/// Half-open pixel rectangle [x0, x0+w) x [y0, y0+h).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  int x1() const { return x0 + w; }
  int y1() const { return y0 + h; }
  bool empty() const { return w <= 0 || h <= 0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1() && y >= y0 && y < y1(); }

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Intersection of two rects; an empty result has w == 0 or h == 0.
PixelRect intersect(const PixelRect& a, const PixelRect& b);

/// True when a and b share a region of nonzero area.
bool overlaps(const PixelRect& a, const PixelRect& b);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

class RasterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BoundsError : public RasterError {
 public:
  using RasterError::RasterError;
};

class DegenerateRectError : public RasterError {
 public:
  using RasterError::RasterError;
};

class DecodeError : public RasterError {
 public:
  using RasterError::RasterError;
};

/// 8-bit RGB image, row-major, origin top-left.
class RasterImage {
 public:
  static constexpr int kChannels = 3;

  RasterImage() = default;
  RasterImage(int width, int height, Rgb fill = {});
  RasterImage(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0; }
  PixelRect bounds() const { return {0, 0, width_, height_}; }

  std::uint8_t& at(int x, int y, int c) { return pixels_[index(x, y) + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels_[index(x, y) + c]; }

  Rgb pixel(int x, int y) const {
    const std::size_t i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set_pixel(int x, int y, Rgb v) {
    const std::size_t i = index(x, y);
    pixels_[i] = v.r;
    pixels_[i + 1] = v.g;
    pixels_[i + 2] = v.b;
  }

  std::span<const std::uint8_t> data() const { return pixels_; }
  std::span<std::uint8_t> data() { return pixels_; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Copies the pixels under r. Throws BoundsError / DegenerateRectError.
RasterImage crop(const RasterImage& img, const PixelRect& r);

/// Resizes to tw x th. Integer-factor downscales use the block mean; every
/// other case samples bilinearly at pixel centers with clamp-to-edge. Both
/// round half-up to 8 bits.
RasterImage resample(const RasterImage& img, int tw, int th);

/// Returns dst with src written at (x, y). Throws BoundsError on overflow.
RasterImage paste(RasterImage dst, const RasterImage& src, int x, int y);

/// In-place variant of paste used when assembling canvases.
void paste_into(RasterImage& dst, const RasterImage& src, int x, int y);

// PNG codec (8-bit RGB).
std::vector<std::uint8_t> encode_image(const RasterImage& img);
RasterImage decode_image(std::span<const std::uint8_t> bytes);

RasterImage read_image(const std::string& path);
void write_image(const std::string& path, const RasterImage& img);

}  // namespace weedctx
