#include "critter/avatar/image.hpp"

#include <png.h>

#include <cstring>

#include "critter/util/error.hpp"

namespace critter::avatar {

void AvatarImage::validate() const {
  if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
  if (rgba.size() != 4ull * static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InvalidArgument("image buffer length does not match 4*width*height");
  }
}

std::vector<std::uint8_t> encode_png(const AvatarImage& image) {
  image.validate();
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGBA;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.rgba.data(), 0, nullptr)) {
    throw Error(std::string("PNG encode failed: ") + png.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.rgba.data(), 0, nullptr)) {
    throw Error(std::string("PNG encode failed: ") + png.message);
  }
  out.resize(size);
  return out;
}

AvatarImage decode_png(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) throw ParseError("payload is not a PNG");
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw ParseError(std::string("PNG decode failed: ") + png.message);
  }
  png.format = PNG_FORMAT_RGBA;
  AvatarImage out;
  out.width = static_cast<int>(png.width);
  out.height = static_cast<int>(png.height);
  out.rgba.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, out.rgba.data(), 0, nullptr)) {
    png_image_free(&png);
    throw ParseError(std::string("PNG decode failed: ") + png.message);
  }
  return out;
}

}  // namespace critter::avatar
