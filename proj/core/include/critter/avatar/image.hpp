#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace critter::avatar {

struct ImageProvenance {
  std::string service;  // "mock" or the service URL
  std::string prompt;
};

/// Straight RGBA8, row-major, top row first.
struct AvatarImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;
  ImageProvenance provenance;

  /// Throws InvalidArgument unless rgba.size() == 4*width*height and both
  /// sides are positive.
  void validate() const;
};

std::vector<std::uint8_t> encode_png(const AvatarImage& image);
/// Throws ParseError when the bytes are not a PNG.
AvatarImage decode_png(std::span<const std::uint8_t> bytes);

}  // namespace critter::avatar
