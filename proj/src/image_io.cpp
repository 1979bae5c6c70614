#include "wavelatent/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace wavelatent {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ImageU8 decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ImageError("corrupt PNG " + name + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  ImageU8 out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = color ? 3 : 1;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ImageError("corrupt PNG " + name + ": " + msg);
  }
  return out;
}

// Reads one whitespace-delimited header token, skipping '#' comments.
int pnm_token(const std::vector<std::uint8_t>& b, std::size_t& pos, const std::string& name) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= b.size() || !std::isdigit(b[pos])) throw ImageError("corrupt PNM header in " + name);
  long value = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    value = value * 10 + (b[pos++] - '0');
    if (value > (1 << 24)) throw ImageError("PNM header value too large in " + name);
  }
  return static_cast<int>(value);
}

ImageU8 decode_pnm(const std::vector<std::uint8_t>& b, const std::string& name) {
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '6' && b[1] != '5')) {
    throw ImageError("unsupported or corrupt PNM " + name + " (binary P5/P6 only)");
  }
  std::size_t pos = 2;
  ImageU8 out;
  out.channels = b[1] == '6' ? 3 : 1;
  out.width = pnm_token(b, pos, name);
  out.height = pnm_token(b, pos, name);
  const int maxval = pnm_token(b, pos, name);
  if (out.width <= 0 || out.height <= 0 || maxval <= 0 || maxval > 255) {
    throw ImageError("unsupported PNM geometry or maxval in " + name);
  }
  if (pos >= b.size() || !std::isspace(b[pos])) throw ImageError("corrupt PNM header in " + name);
  ++pos;
  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  if (b.size() - pos < n) throw ImageError("truncated PNM data in " + name);
  out.pixels.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.begin() + static_cast<std::ptrdiff_t>(pos + n));
  if (maxval != 255) {
    for (auto& v : out.pixels) v = static_cast<std::uint8_t>(std::lround(255.0 * std::min<int>(v, maxval) / maxval));
  }
  return out;
}

}  // namespace

bool has_image_extension(const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

ImageU8 read_image(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, path.string());
  if (bytes.size() >= 2 && bytes[0] == 'P') return decode_pnm(bytes, path.string());
  throw ImageError("unrecognised image format: " + path.string());
}

void write_image(const std::filesystem::path& path, const ImageU8& image) {
  if (image.channels != 1 && image.channels != 3) throw ImageError("can only write gray or RGB images");
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * image.channels) {
    throw ImageError("pixel buffer does not match image geometry");
  }
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png, path.string().c_str(), 0, image.pixels.data(), 0, nullptr)) {
      throw ImageError("failed writing " + path.string() + ": " + png.message);
    }
    return;
  }
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ImageError("cannot open " + path.string() + " for writing");
    out << (image.channels == 3 ? "P6" : "P5") << '\n' << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw ImageError("failed writing " + path.string());
    return;
  }
  throw ImageError("unsupported output extension: " + path.string());
}

ImageU8 center_crop_square(const ImageU8& image) {
  const int side = std::min(image.width, image.height);
  const int x0 = (image.width - side) / 2;
  const int y0 = (image.height - side) / 2;
  ImageU8 out{side, side, image.channels, {}};
  out.pixels.reserve(static_cast<std::size_t>(side) * side * image.channels);
  for (int y = 0; y < side; ++y) {
    const auto* row = image.pixels.data() + ((static_cast<std::size_t>(y0 + y) * image.width) + x0) * image.channels;
    out.pixels.insert(out.pixels.end(), row, row + static_cast<std::size_t>(side) * image.channels);
  }
  return out;
}

ImageU8 resize_bilinear(const ImageU8& image, int width, int height) {
  if (width <= 0 || height <= 0) throw ImageError("resize target must be positive");
  if (width == image.width && height == image.height) return image;
  ImageU8 out{width, height, image.channels, {}};
  out.pixels.resize(static_cast<std::size_t>(width) * height * image.channels);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double top = (1.0 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
        const double bottom = (1.0 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
        const double v = (1.0 - wy) * top + wy * bottom;
        out.pixels[(static_cast<std::size_t>(y) * width + x) * image.channels + c] =
            static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace wavelatent
