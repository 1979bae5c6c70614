#include "wavelatent/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "wavelatent/rng.hpp"

namespace wavelatent {

namespace {

using Rgb = std::array<double, 3>;

constexpr std::array<Rgb, 4> kPalette{{
    {0.24, 0.38, 0.20},  // vegetation
    {0.52, 0.42, 0.30},  // soil
    {0.50, 0.50, 0.50},  // urban
    {0.14, 0.24, 0.34},  // water
}};

struct Canvas {
  int size;
  std::vector<double> v;  // CHW

  double& at(int c, int y, int x) { return v[(static_cast<std::size_t>(c) * size + y) * size + x]; }
};

Tile render_tile(int size, std::uint64_t seed, int index) {
  Rng rng = Rng::stream(seed, "synth", static_cast<std::uint64_t>(index));
  Canvas cv{size, std::vector<double>(3 * static_cast<std::size_t>(size) * size)};
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  // Terrain base, gradient and undulation.
  const Rgb& base = kPalette[rng.below(kPalette.size())];
  Rgb color{}, gx{}, gy{};
  for (int c = 0; c < 3; ++c) {
    color[c] = base[c] + rng.uniform(-0.05, 0.05);
    gx[c] = rng.uniform(-0.15, 0.15);
    gy[c] = rng.uniform(-0.15, 0.15);
  }
  const double fx = rng.uniform(0.5, 1.5);
  const double fy = rng.uniform(0.5, 1.5);
  const double phase = rng.uniform(0.0, kTwoPi);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size - 0.5;
      const double w = (y + 0.5) / size - 0.5;
      const double wave = 0.06 * std::sin(kTwoPi * (fx * u + fy * w) + phase);
      for (int c = 0; c < 3; ++c) cv.at(c, y, x) = color[c] + gx[c] * u + gy[c] * w + wave;
    }
  }

  // Fields with row texture.
  const int n_fields = rng.integer(1, 3);
  for (int f = 0; f < n_fields; ++f) {
    const int w = rng.integer(size / 4, size / 2);
    const int h = rng.integer(size / 4, size / 2);
    const int x0 = rng.integer(0, size - w);
    const int y0 = rng.integer(0, size - h);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double period = rng.uniform(2.5, 7.0);
    const double amp = rng.uniform(0.05, 0.12);
    const double ph = rng.uniform(0.0, kTwoPi);
    Rgb tint{};
    for (double& t : tint) t = rng.uniform(-0.08, 0.08);
    const double kx = std::cos(theta) / period;
    const double ky = std::sin(theta) / period;
    for (int y = y0; y < y0 + h; ++y) {
      for (int x = x0; x < x0 + w; ++x) {
        const double rows = amp * std::sin(kTwoPi * (kx * x + ky * y) + ph);
        for (int c = 0; c < 3; ++c) cv.at(c, y, x) += tint[c] + rows;
      }
    }
  }

  // Road.
  if (rng.uniform() < 0.5) {
    const double grey = rng.uniform(0.45, 0.6);
    const bool horizontal = rng.uniform() < 0.5;
    const int pos = rng.integer(2, size - 4);
    for (int t = 0; t < size; ++t) {
      for (int k = 0; k < 2; ++k) {
        const int y = horizontal ? pos + k : t;
        const int x = horizontal ? t : pos + k;
        for (int c = 0; c < 3; ++c) cv.at(c, y, x) = grey;
      }
    }
  }

  // Buildings with a shadow edge on the lower-right.
  const int n_buildings = rng.integer(2, 8);
  for (int b = 0; b < n_buildings; ++b) {
    const int w = rng.integer(3, 10);
    const int h = rng.integer(3, 10);
    const int x0 = rng.integer(0, size - w - 1);
    const int y0 = rng.integer(0, size - h - 1);
    const bool bright = rng.uniform() < 0.7;
    const double roof = bright ? rng.uniform(0.65, 0.92) : rng.uniform(0.12, 0.25);
    Rgb roof_rgb{};
    for (double& r : roof_rgb) r = roof + rng.uniform(-0.04, 0.04);
    for (int y = y0; y <= y0 + h; ++y) {
      for (int x = x0; x <= x0 + w; ++x) {
        const bool shadow = (y == y0 + h) || (x == x0 + w);
        for (int c = 0; c < 3; ++c) cv.at(c, y, x) = shadow ? cv.at(c, y, x) * 0.55 : roof_rgb[c];
      }
    }
  }

  // Speckle, then quantise to bytes.
  ImageU8 img{size, size, 3, std::vector<std::uint8_t>(3 * static_cast<std::size_t>(size) * size)};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(cv.at(c, y, x) + 0.035 * rng.normal(), 0.0, 1.0);
        img.pixels[(static_cast<std::size_t>(y) * size + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  char id[32];
  std::snprintf(id, sizeof(id), "synth_%06d", index);
  return tile_from_image(img, id);
}

}  // namespace

Dataset synth_tiles(int n, int size, std::uint64_t seed) {
  if (n <= 0) throw DataError("synth_tiles: n must be positive");
  if (size < 16 || size % 2 != 0) throw DataError("synth_tiles: size must be even and at least 16");
  Dataset ds;
  ds.tiles.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ds.tiles.push_back(render_tile(size, seed, i));
  ds.split.assign(ds.tiles.size(), Split::kTrain);
  return ds;
}

}  // namespace wavelatent
