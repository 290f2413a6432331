#include <png.h>

#include <cstring>

#include "weedctx/raster.hpp"

namespace weedctx {

std::vector<std::uint8_t> encode_image(const RasterImage& img) {
  if (img.empty()) {
    throw RasterError("cannot encode an empty image");
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_RGB;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data().data(), 0, nullptr)) {
    throw RasterError(std::string("png size query failed: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data().data(), 0, nullptr)) {
    throw RasterError(std::string("png encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

RasterImage decode_image(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw DecodeError(std::string("png header rejected: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  if (image.width == 0 || image.height == 0 || image.width > (1u << 16) || image.height > (1u << 16)) {
    png_image_free(&image);
    throw DecodeError("png dimensions out of range");
  }
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DecodeError(std::string("png decode failed: ") + image.message);
  }
  return RasterImage(static_cast<int>(image.width), static_cast<int>(image.height), std::move(pixels));
}

}  // namespace weedctx
