#include "weedctx/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace weedctx {

PixelRect intersect(const PixelRect& a, const PixelRect& b) {
  const int x0 = std::max(a.x0, b.x0);
  const int y0 = std::max(a.y0, b.y0);
  const int x1 = std::min(a.x1(), b.x1());
  const int y1 = std::min(a.y1(), b.y1());
  return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

bool overlaps(const PixelRect& a, const PixelRect& b) { return !intersect(a, b).empty(); }

RasterImage::RasterImage(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw RasterError("image dimensions must be positive");
  }
  pixels_.resize(static_cast<std::size_t>(width) * height * kChannels);
  for (std::size_t i = 0; i < pixels_.size(); i += kChannels) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

RasterImage::RasterImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) {
    throw RasterError("image dimensions must be positive");
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * height * kChannels) {
    throw RasterError("pixel buffer length does not match dimensions");
  }
}

RasterImage crop(const RasterImage& img, const PixelRect& r) {
  if (r.w < 1 || r.h < 1) {
    throw DegenerateRectError("crop rect has zero extent");
  }
  if (r.x0 < 0 || r.y0 < 0 || r.x1() > img.width() || r.y1() > img.height()) {
    throw BoundsError("crop rect outside image bounds");
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(r.w) * r.h * RasterImage::kChannels);
  const auto src = img.data();
  const std::size_t row_bytes = static_cast<std::size_t>(r.w) * RasterImage::kChannels;
  for (int y = 0; y < r.h; ++y) {
    const std::size_t from =
        (static_cast<std::size_t>(r.y0 + y) * img.width() + r.x0) * RasterImage::kChannels;
    std::memcpy(out.data() + y * row_bytes, src.data() + from, row_bytes);
  }
  return RasterImage(r.w, r.h, std::move(out));
}

namespace {

RasterImage block_mean(const RasterImage& img, int tw, int th) {
  const int kx = img.width() / tw;
  const int ky = img.height() / th;
  const std::uint32_t n = static_cast<std::uint32_t>(kx) * ky;
  RasterImage out(tw, th);
  for (int j = 0; j < th; ++j) {
    for (int i = 0; i < tw; ++i) {
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        std::uint32_t sum = 0;
        for (int y = j * ky; y < (j + 1) * ky; ++y) {
          for (int x = i * kx; x < (i + 1) * kx; ++x) {
            sum += img.at(x, y, c);
          }
        }
        // floor(sum / n + 1/2) without leaving integers.
        out.at(i, j, c) = static_cast<std::uint8_t>((2 * sum + n) / (2 * n));
      }
    }
  }
  return out;
}

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(dst);
  for (int i = 0; i < dst; ++i) {
    // Multiply before dividing so exact midpoints stay exact.
    double s = (i + 0.5) * src / dst - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int lo = static_cast<int>(std::floor(s));
    const int hi = std::min(lo + 1, src - 1);
    taps[i] = {lo, hi, s - lo};
  }
  return taps;
}

RasterImage bilinear(const RasterImage& img, int tw, int th) {
  const auto tx = bilinear_taps(img.width(), tw);
  const auto ty = bilinear_taps(img.height(), th);
  RasterImage out(tw, th);
  for (int j = 0; j < th; ++j) {
    const Tap& vy = ty[j];
    for (int i = 0; i < tw; ++i) {
      const Tap& vx = tx[i];
      for (int c = 0; c < RasterImage::kChannels; ++c) {
        const double top = img.at(vx.lo, vy.lo, c) * (1.0 - vx.frac) + img.at(vx.hi, vy.lo, c) * vx.frac;
        const double bot = img.at(vx.lo, vy.hi, c) * (1.0 - vx.frac) + img.at(vx.hi, vy.hi, c) * vx.frac;
        const double v = top * (1.0 - vy.frac) + bot * vy.frac;
        out.at(i, j, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

}  // namespace

RasterImage resample(const RasterImage& img, int tw, int th) {
  if (tw < 1 || th < 1) {
    throw DegenerateRectError("resample target must be at least 1x1");
  }
  if (img.width() % tw == 0 && img.height() % th == 0) {
    return block_mean(img, tw, th);
  }
  return bilinear(img, tw, th);
}

void paste_into(RasterImage& dst, const RasterImage& src, int x, int y) {
  if (x < 0 || y < 0 || x + src.width() > dst.width() || y + src.height() > dst.height()) {
    throw BoundsError("pasted image overflows destination");
  }
  const std::size_t row_bytes = static_cast<std::size_t>(src.width()) * RasterImage::kChannels;
  auto out = dst.data();
  const auto in = src.data();
  for (int row = 0; row < src.height(); ++row) {
    const std::size_t to = (static_cast<std::size_t>(y + row) * dst.width() + x) * RasterImage::kChannels;
    std::memcpy(out.data() + to, in.data() + row * row_bytes, row_bytes);
  }
}

RasterImage paste(RasterImage dst, const RasterImage& src, int x, int y) {
  paste_into(dst, src, x, y);
  return dst;
}

RasterImage read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DecodeError("cannot open image file: " + path);
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_image(bytes);
}

void write_image(const std::string& path, const RasterImage& img) {
  const auto bytes = encode_image(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw RasterError("cannot open image file for writing: " + path);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw RasterError("failed writing image file: " + path);
  }
}

}  // namespace weedctx
