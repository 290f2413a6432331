#include <gtest/gtest.h>
#include <zlib.h>

#include "test_support.hpp"
#include "weedctx/raster.hpp"

using namespace weedctx;
using testing_support::block_mean_oracle;
using testing_support::random_image;

namespace {

RasterImage checkerboard(int w, int h) {
  RasterImage img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t v = (x + y) % 2 ? 255 : 0;
      img.set_pixel(x, y, {v, static_cast<std::uint8_t>(x * 10 + y), static_cast<std::uint8_t>(y * 10 + x)});
    }
  }
  return img;
}

// Minimal PNG writer built from zlib and the chunk layout alone.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  out.insert(out.end(), body.begin(), body.end());
  put_u32(out, static_cast<std::uint32_t>(crc32(0, body.data(), static_cast<uInt>(body.size()))));
}

std::vector<std::uint8_t> reference_png(int w, int h, const std::vector<std::uint8_t>& rgb) {
  std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, w);
  put_u32(ihdr, h);
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
  put_chunk(out, "IHDR", ihdr);
  std::vector<std::uint8_t> raw;
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), rgb.begin() + y * w * 3, rgb.begin() + (y + 1) * w * 3);
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(len);
  EXPECT_EQ(compress(z.data(), &len, raw.data(), static_cast<uLong>(raw.size())), Z_OK);
  z.resize(len);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

}  // namespace

TEST(Rect, IntersectAndOverlap) {
  EXPECT_EQ(intersect({0, 0, 10, 10}, {5, 5, 10, 10}), (PixelRect{5, 5, 5, 5}));
  EXPECT_TRUE(intersect({0, 0, 10, 10}, {10, 0, 5, 5}).empty());
  EXPECT_FALSE(overlaps({0, 0, 10, 10}, {10, 0, 5, 5}));
  EXPECT_TRUE(overlaps({0, 0, 10, 10}, {9, 9, 5, 5}));
}

TEST(Crop, FullRectIsIdentity) {
  const auto img = random_image(37, 23, 1);
  EXPECT_EQ(crop(img, img.bounds()), img);
}

TEST(Crop, TopLeftTile) {
  const auto img = random_image(60, 40, 2);
  const auto tile = crop(img, {0, 0, 30, 30});
  ASSERT_EQ(tile.width(), 30);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 30; ++x) EXPECT_EQ(tile.pixel(x, y), img.pixel(x, y));
  }
}

TEST(Crop, CheckerboardSubPattern) {
  const auto board = checkerboard(6, 6);
  const auto sub = crop(board, {2, 2, 2, 2});
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) EXPECT_EQ(sub.pixel(x, y), board.pixel(x + 2, y + 2));
  }
}

TEST(Crop, CompositionMatchesDirectCrop) {
  const auto img = random_image(50, 40, 3);
  const auto outer = crop(img, {5, 7, 30, 20});
  EXPECT_EQ(crop(outer, {3, 4, 10, 8}), crop(img, {8, 11, 10, 8}));
}

TEST(Crop, Errors) {
  const auto img = random_image(10, 10, 4);
  EXPECT_THROW(crop(img, {5, 5, 6, 2}), BoundsError);
  EXPECT_THROW(crop(img, {-1, 0, 2, 2}), BoundsError);
  EXPECT_THROW(crop(img, {0, 0, 0, 2}), DegenerateRectError);
}

TEST(Resample, SameSizeIsIdentity) {
  const auto img = random_image(30, 30, 5);
  EXPECT_EQ(resample(img, 30, 30), img);
}

TEST(Resample, BlockMeanOracle) {
  const auto img = random_image(6, 6, 6);
  EXPECT_EQ(resample(img, 2, 2), block_mean_oracle(img, 3));
  const auto big = random_image(90, 90, 7);
  EXPECT_EQ(resample(big, 30, 30), block_mean_oracle(big, 3));
}

TEST(Resample, BlockMeanRoundsHalfUp) {
  RasterImage img(2, 1);
  img.set_pixel(0, 0, {0, 1, 2});
  img.set_pixel(1, 0, {1, 2, 2});
  const auto out = resample(img, 1, 1);
  EXPECT_EQ(out.pixel(0, 0), (Rgb{1, 2, 2}));  // 0.5 -> 1, 1.5 -> 2, 2 -> 2
}

TEST(Resample, ConstantPropagates) {
  const RasterImage one(1, 1, Rgb{17, 99, 250});
  const auto up = resample(one, 30, 30);
  EXPECT_EQ(up, RasterImage(30, 30, Rgb{17, 99, 250}));
  const RasterImage flat(7, 5, Rgb{3, 4, 5});
  EXPECT_EQ(resample(flat, 3, 4), RasterImage(3, 4, Rgb{3, 4, 5}));
}

TEST(Resample, BilinearHandExample) {
  RasterImage img(2, 1);
  img.set_pixel(0, 0, {0, 0, 0});
  img.set_pixel(1, 0, {101, 100, 10});
  const auto out = resample(img, 3, 1);
  // Sample positions -1/6 (clamped to 0), 1/2, 7/6 (clamped to 1).
  EXPECT_EQ(out.pixel(0, 0), (Rgb{0, 0, 0}));
  EXPECT_EQ(out.pixel(1, 0), (Rgb{51, 50, 5}));
  EXPECT_EQ(out.pixel(2, 0), (Rgb{101, 100, 10}));
}

TEST(Resample, RejectsEmptyTarget) { EXPECT_THROW(resample(random_image(4, 4, 1), 0, 2), DegenerateRectError); }

TEST(Paste, SelfOverwrite) {
  const auto img = random_image(20, 20, 8);
  EXPECT_EQ(paste(img, img, 0, 0), img);
}

TEST(Paste, CenterBlock) {
  const RasterImage white(30, 30, Rgb{255, 255, 255});
  const RasterImage black(10, 10, Rgb{0, 0, 0});
  const auto out = paste(white, black, 10, 10);
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 30; ++x) {
      const bool inside = x >= 10 && x < 20 && y >= 10 && y < 20;
      EXPECT_EQ(out.pixel(x, y), (inside ? Rgb{0, 0, 0} : Rgb{255, 255, 255})) << x << "," << y;
    }
  }
}

TEST(Paste, OverflowIsBoundsError) {
  EXPECT_THROW(paste(RasterImage(30, 30), RasterImage(10, 10), 25, 25), BoundsError);
}

TEST(Codec, RoundTrip) {
  const auto img = random_image(64, 64, 9);
  EXPECT_EQ(decode_image(encode_image(img)), img);
}

TEST(Codec, TruncatedStreamFails) {
  auto bytes = encode_image(random_image(16, 16, 10));
  bytes.resize(bytes.size() / 2);
  EXPECT_THROW(decode_image(bytes), DecodeError);
  EXPECT_THROW(decode_image(std::vector<std::uint8_t>{1, 2, 3}), DecodeError);
}

TEST(Codec, DecodesIndependentlyEncodedReference) {
  const std::vector<std::uint8_t> rgb{255, 0, 0, 0, 255, 0, 0, 0, 255, 12, 34, 56};
  const auto png = reference_png(2, 2, rgb);
  const auto img = decode_image(png);
  ASSERT_EQ(img.width(), 2);
  ASSERT_EQ(img.height(), 2);
  EXPECT_EQ(img.pixel(0, 0), (Rgb{255, 0, 0}));
  EXPECT_EQ(img.pixel(1, 0), (Rgb{0, 255, 0}));
  EXPECT_EQ(img.pixel(0, 1), (Rgb{0, 0, 255}));
  EXPECT_EQ(img.pixel(1, 1), (Rgb{12, 34, 56}));
}

TEST(Codec, FileRoundTrip) {
  testing_support::TempDir dir;
  const auto img = random_image(13, 7, 11);
  write_image(dir.str("a.png"), img);
  EXPECT_EQ(read_image(dir.str("a.png")), img);
  EXPECT_THROW(read_image(dir.str("missing.png")), DecodeError);
}
