#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ieqa {

/// 8-bit interleaved RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3, row-major, RGB

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  bool empty() const { return width <= 0 || height <= 0; }
  std::size_t size() const { return pixels.size(); }

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool operator==(const Image&) const = default;
};

/// Rec. 601 luma in double precision, row-major width*height.
std::vector<double> luma(const Image& img);

namespace image_io {

/// Decodes any format OpenCV understands. Alpha is dropped (with a warning),
/// gray is expanded to RGB, deeper bit depths are scaled to 8 bits.
Image read(const std::filesystem::path& path);

/// Writes PNG (or whatever the extension selects).
void write(const Image& img, const std::filesystem::path& path);

bool is_decodable(const std::filesystem::path& path);

}  // namespace image_io

/// Shorter side becomes `target`; the longer side is scaled by the same ratio
/// with round-half-up. Bicubic interpolation. Images already at target pass
/// through untouched.
Image resize_shorter_side(const Image& img, int target = 512);

/// Output dimensions of resize_shorter_side without touching pixels.
std::pair<int, int> shorter_side_dims(int width, int height, int target);

}  // namespace ieqa
