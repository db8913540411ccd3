#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace sscalib {

/// Interleaved 8-bit raster, one or three channels, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, int c = 1, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  /// Bilinear sample of channel c at a continuous pixel position (pixel
  /// centers on integer coordinates). Returns `outside` beyond the raster.
  double sample(double x, double y, int c = 0, double outside = 0.0) const;

  Image to_gray() const;
  Image to_rgb() const;

  bool operator==(const Image&) const = default;
};

/// Reads PGM (P2/P5), PPM (P3/P6) or PNG, chosen by file signature.
Image read_image(const std::filesystem::path& path);

/// Writes PNG for a ".png" extension, binary PGM/PPM otherwise.
void write_image(const std::filesystem::path& path, const Image& image);

}  // namespace sscalib
