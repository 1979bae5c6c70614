#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "helpers.hpp"
#include "wavelatent/dataset.hpp"
#include "wavelatent/image_io.hpp"
#include "wavelatent/synth.hpp"
#include "wavelatent/wavelet.hpp"

using namespace wavelatent;
using testutil::TempDir;

namespace {

ImageU8 pattern(int w, int h, int channels) {
  ImageU8 img{w, h, channels, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * channels)};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) {
        img.pixels[(static_cast<std::size_t>(y) * w + x) * channels + c] =
            static_cast<std::uint8_t>((x * 7 + y * 13 + c * 71) % 256);
      }
  return img;
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST_SUITE("data-io") {
  TEST_CASE("normalisation maps bytes affinely and round-trips all 256 values") {
    CHECK(normalize_byte(255) == 1.0f);
    CHECK(normalize_byte(0) == -1.0f);
    for (int v = 0; v < 256; ++v) CHECK(denormalize_value(normalize_byte(static_cast<std::uint8_t>(v))) == v);
    CHECK(denormalize_value(3.0f) == 255);
    CHECK(denormalize_value(-3.0f) == 0);
  }

  TEST_CASE("PPM, PGM and PNG round trips") {
    TempDir dir("imgio");
    for (const char* name : {"a.ppm", "a.png"}) {
      const ImageU8 img = pattern(13, 9, 3);
      write_image(dir / name, img);
      const ImageU8 back = read_image(dir / name);
      CHECK(back.width == 13);
      CHECK(back.height == 9);
      CHECK(back.channels == 3);
      CHECK(back.pixels == img.pixels);
    }
    for (const char* name : {"g.pgm", "g.png"}) {
      const ImageU8 img = pattern(6, 5, 1);
      write_image(dir / name, img);
      const ImageU8 back = read_image(dir / name);
      CHECK(back.channels == 1);
      CHECK(back.pixels == img.pixels);
    }
  }

  TEST_CASE("PPM header comments and maxval are honoured") {
    TempDir dir("pnm");
    write_bytes(dir / "c.ppm", std::string("P6\n# comment\n2 1\n# another\n255\n") + std::string("\x01\x02\x03\x04\x05\x06", 6));
    const ImageU8 img = read_image(dir / "c.ppm");
    CHECK(img.pixels == std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6});
    write_bytes(dir / "m.pgm", std::string("P5 2 1 100\n") + std::string("\x00\x64", 2));
    const ImageU8 scaled = read_image(dir / "m.pgm");
    CHECK(scaled.pixels == std::vector<std::uint8_t>{0, 255});
    write_bytes(dir / "short.ppm", "P6\n4 4\n255\n\x01\x02");
    CHECK_THROWS_AS(read_image(dir / "short.ppm"), ImageError);
    write_bytes(dir / "deep.ppm", "P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06");
    CHECK_THROWS_AS(read_image(dir / "deep.ppm"), ImageError);
    CHECK_THROWS_AS(read_image(dir / "missing.png"), ImageError);
    write_bytes(dir / "junk.png", "not a png at all");
    CHECK_THROWS_AS(read_image(dir / "junk.png"), ImageError);
  }

  TEST_CASE("centre crop then bilinear resize") {
    const ImageU8 wide = pattern(300, 200, 3);
    const ImageU8 sq = center_crop_square(wide);
    CHECK(sq.width == 200);
    CHECK(sq.height == 200);
    CHECK(sq.at(0, 0, 0) == wide.at(0, 50, 0));
    CHECK(sq.at(199, 199, 2) == wide.at(199, 249, 2));
    const ImageU8 tall = center_crop_square(pattern(10, 17, 1));
    CHECK(tall.height == 10);
    CHECK(tall.at(0, 0, 0) == pattern(10, 17, 1).at(3, 0, 0));

    // Exact 2x downsample with half-pixel centres averages 2x2 blocks.
    ImageU8 checker{4, 4, 1, {0, 100, 0, 100, 100, 0, 100, 0, 0, 100, 0, 100, 100, 0, 100, 0}};
    const ImageU8 half = resize_bilinear(checker, 2, 2);
    for (auto v : half.pixels) CHECK(v == 50);
    const ImageU8 same = resize_bilinear(wide, 300, 200);
    CHECK(same.pixels == wide.pixels);
  }

  TEST_CASE("folder loading: order, preprocessing, corrupt and grayscale files") {
    TempDir dir("folder");
    write_image(dir / "b_tile.png", pattern(256, 256, 3));
    write_image(dir / "a_tile.ppm", pattern(300, 200, 3));
    write_image(dir / "c_gray.png", pattern(64, 64, 1));
    write_bytes(dir / "d_broken.png", "\x89PNG\r\n\x1a\n garbage");
    write_bytes(dir / "notes.txt", "ignored");
    const Dataset ds = load_folder(dir.path, 64);
    REQUIRE(ds.size() == 2);
    CHECK(ds.tiles[0].source_id == "a_tile.ppm");
    CHECK(ds.tiles[1].source_id == "b_tile.png");
    CHECK(ds.skipped_corrupt == 1);
    CHECK(ds.rejected_non_rgb == 1);
    for (const Tile& t : ds.tiles) {
      CHECK(t.height == 64);
      CHECK(t.width == 64);
      CHECK(t.pixels.size() == 3u * 64 * 64);
      for (float v : t.pixels) {
        CHECK(v >= -1.0f);
        CHECK(v <= 1.0f);
      }
    }
    const ImageU8 expect = resize_bilinear(center_crop_square(pattern(300, 200, 3)), 64, 64);
    CHECK(ds.tiles[0].pixels[0] == normalize_byte(expect.at(0, 0, 0)));
    CHECK(ds.tiles[0].pixels[64 * 64 + 5] == normalize_byte(expect.at(0, 5, 1)));

    TempDir empty("empty");
    CHECK_THROWS_AS(load_folder(empty.path, 64), DataError);
    CHECK_THROWS_AS(load_folder(empty / "nope", 64), DataError);
  }

  TEST_CASE("parallel loading gives the same dataset") {
    TempDir dir("threads");
    for (int i = 0; i < 6; ++i) write_image(dir / ("t" + std::to_string(i) + ".ppm"), pattern(40 + i, 40, 3));
    ::setenv("WAVELATENT_THREADS", "1", 1);
    const Dataset serial = load_folder(dir.path, 32);
    ::setenv("WAVELATENT_THREADS", "4", 1);
    CHECK(data_threads() == 4);
    const Dataset parallel = load_folder(dir.path, 32);
    ::unsetenv("WAVELATENT_THREADS");
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
      CHECK(serial.tiles[i].source_id == parallel.tiles[i].source_id);
      CHECK(serial.tiles[i].pixels == parallel.tiles[i].pixels);
    }
  }

  TEST_CASE("splits are a pinned function of count and seed") {
    auto val = [](std::size_t n, std::uint64_t seed) {
      std::vector<std::size_t> out;
      const auto s = make_splits(n, seed, 0.1);
      for (std::size_t i = 0; i < n; ++i) {
        if (s[i] == Split::kVal) out.push_back(i);
      }
      return out;
    };
    CHECK(val(20, 0) == std::vector<std::size_t>{9, 10});
    CHECK(val(37, 42) == std::vector<std::size_t>{0, 20, 26, 28});
    CHECK(val(500, 0).size() == 50);
    CHECK(val(5, 1).size() == 1);
    CHECK(val(1, 1).empty());
    CHECK(val(500, 0) == val(500, 0));
    CHECK(val(500, 0) != val(500, 1));
  }

  TEST_CASE("dataset cache round trip") {
    TempDir dir("cache");
    const Dataset ds = synth_tiles(3, 16, 9);
    save_dataset_cache(dir / "d.xdat", ds);
    const Dataset back = load_dataset_cache(dir / "d.xdat");
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back.tiles[i].source_id == ds.tiles[i].source_id);
      CHECK(back.tiles[i].pixels == ds.tiles[i].pixels);
    }
    write_bytes(dir / "bad.xdat", "XDWT0000");
    CHECK_THROWS(load_dataset_cache(dir / "bad.xdat"));
  }

  TEST_CASE("synthetic tiles are deterministic, byte-exact and use every sub-band") {
    const Dataset a = synth_tiles(40, 64, 0);
    const Dataset b = synth_tiles(40, 64, 0);
    const Dataset c = synth_tiles(40, 64, 1);
    CHECK(a.tiles[17].pixels == b.tiles[17].pixels);
    CHECK(a.tiles[17].pixels != c.tiles[17].pixels);
    CHECK(synth_tiles(5, 64, 0).tiles[3].pixels == a.tiles[3].pixels);  // tile i depends only on (seed, i)
    std::array<double, 4> mean{};
    for (const Tile& t : a.tiles) {
      CHECK(t.height == 64);
      for (float v : t.pixels) CHECK(normalize_byte(denormalize_value(v)) == v);
      Tape tape(Tape::Mode::kInference);
      const auto e = band_energy_fractions(dwt2(tape, Tensor::from({1, 3, 64, 64}, t.pixels)));
      for (int k = 0; k < 4; ++k) mean[k] += e[k] / a.size();
    }
    for (int k = 1; k < 4; ++k) CHECK(mean[k] >= 0.01);
    CHECK_THROWS_AS(synth_tiles(2, 15, 0), DataError);
  }
}
