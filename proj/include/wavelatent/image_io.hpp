#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace wavelatent {

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit interleaved image, row-major.
struct ImageU8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

/// Decodes PNG (any bit depth, via libpng) or binary PPM/PGM (P6/P5,
/// maxval <= 255). Grayscale files decode with channels == 1; PNG alpha is
/// dropped. Throws ImageError on unreadable or corrupt input.
ImageU8 read_image(const std::filesystem::path& path);

/// Writes PNG or binary PPM/PGM depending on the extension.
void write_image(const std::filesystem::path& path, const ImageU8& image);

/// Centre crop to the largest square.
ImageU8 center_crop_square(const ImageU8& image);

/// Bilinear resize with half-pixel centres, rounded back to bytes.
ImageU8 resize_bilinear(const ImageU8& image, int width, int height);

bool has_image_extension(const std::filesystem::path& path);

}  // namespace wavelatent
