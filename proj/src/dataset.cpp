#include "wavelatent/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <iostream>
#include <optional>

#include "wavelatent/container.hpp"
#include "wavelatent/rng.hpp"

namespace wavelatent {

std::vector<std::size_t> Dataset::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == which) out.push_back(i);
  }
  return out;
}

float normalize_byte(std::uint8_t v) { return static_cast<float>(v) / 127.5f - 1.0f; }

std::uint8_t denormalize_value(float v) {
  const long b = std::lround((static_cast<double>(v) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(b, 0L, 255L));
}

Tile tile_from_image(const ImageU8& image, std::string source_id) {
  if (image.channels != 3) throw DataError("tile '" + source_id + "' is not RGB");
  Tile t{std::move(source_id), image.height, image.width, {}};
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  t.pixels.resize(3 * plane);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < 3; ++c) t.pixels[c * plane + p] = normalize_byte(image.pixels[p * 3 + c]);
  }
  return t;
}

ImageU8 image_from_chw(std::span<const float> chw, int height, int width) {
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  if (chw.size() % plane != 0) throw DataError("CHW buffer does not match image size");
  const int channels = static_cast<int>(chw.size() / plane);
  if (channels != 1 && channels != 3) throw DataError("CHW buffer must have 1 or 3 channels");
  ImageU8 img{width, height, channels, std::vector<std::uint8_t>(chw.size())};
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < channels; ++c) img.pixels[p * channels + c] = denormalize_value(chw[c * plane + p]);
  }
  return img;
}

int data_threads() {
  const char* env = std::getenv("WAVELATENT_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || n < 1) return 1;
  return static_cast<int>(std::min(n, 64L));
}

namespace {

enum class Outcome { kLoaded, kCorrupt, kNonRgb };

struct LoadResult {
  Outcome outcome = Outcome::kCorrupt;
  std::optional<Tile> tile;
  std::string message;
};

LoadResult load_one(const std::filesystem::path& file, int target_size) {
  LoadResult r;
  try {
    const ImageU8 img = read_image(file);
    if (img.channels != 3) {
      r.outcome = Outcome::kNonRgb;
      r.message = "not RGB";
      return r;
    }
    r.tile = tile_from_image(resize_bilinear(center_crop_square(img), target_size, target_size),
                             file.filename().string());
    r.outcome = Outcome::kLoaded;
  } catch (const ImageError& e) {
    r.outcome = Outcome::kCorrupt;
    r.message = e.what();
  }
  return r;
}

}  // namespace

Dataset load_folder(const std::filesystem::path& dir, int target_size) {
  if (target_size < 2 || target_size % 2 != 0) throw DataError("target size must be even and at least 2");
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw DataError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .png/.ppm files in " + dir.string());

  std::vector<LoadResult> results(files.size());
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(data_threads()), files.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < files.size(); ++i) results[i] = load_one(files[i], target_size);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < files.size(); i += workers) results[i] = load_one(files[i], target_size);
      }));
    }
    for (auto& j : jobs) j.get();
  }

  Dataset ds;
  for (std::size_t i = 0; i < files.size(); ++i) {
    auto& r = results[i];
    switch (r.outcome) {
      case Outcome::kLoaded:
        ds.tiles.push_back(std::move(*r.tile));
        break;
      case Outcome::kCorrupt:
        ++ds.skipped_corrupt;
        std::cerr << "warning: skipping " << files[i].string() << ": " << r.message << "\n";
        break;
      case Outcome::kNonRgb:
        ++ds.rejected_non_rgb;
        std::cerr << "warning: rejecting non-RGB " << files[i].string() << "\n";
        break;
    }
  }
  if (ds.tiles.empty()) throw DataError("no usable RGB images in " + dir.string());
  ds.split.assign(ds.tiles.size(), Split::kTrain);
  return ds;
}

std::vector<Split> make_splits(std::size_t n, std::uint64_t seed, double val_fraction) {
  std::vector<Split> split(n, Split::kTrain);
  if (n < 2 || val_fraction <= 0.0) return split;
  std::size_t n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  Rng rng = Rng::stream(seed, "split");
  const auto perm = rng.permutation(n);
  for (std::size_t i = 0; i < n_val; ++i) split[perm[i]] = Split::kVal;
  return split;
}

void assign_splits(Dataset& dataset, std::uint64_t seed, double val_fraction) {
  dataset.split = make_splits(dataset.size(), seed, val_fraction);
}

Tensor make_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("empty batch");
  const Tile& first = dataset.tiles.at(indices[0]);
  std::vector<float> values;
  values.reserve(indices.size() * first.pixels.size());
  for (std::size_t i : indices) {
    const Tile& t = dataset.tiles.at(i);
    if (t.height != first.height || t.width != first.width) throw DataError("tiles in a batch differ in size");
    values.insert(values.end(), t.pixels.begin(), t.pixels.end());
  }
  return Tensor::from({static_cast<int>(indices.size()), 3, first.height, first.width}, std::move(values));
}

void save_dataset_cache(const std::filesystem::path& path, const Dataset& dataset) {
  Container c;
  c.magic = {'X', 'D', 'A', 'T'};
  c.version = 1;
  c.tag = 0;
  c.fields = {static_cast<std::int32_t>(dataset.size())};
  for (const auto& t : dataset.tiles) c.records.push_back({t.source_id, {3, t.height, t.width}, t.pixels});
  write_container(path, c);
}

Dataset load_dataset_cache(const std::filesystem::path& path) {
  Container c;
  try {
    c = read_container(path, "XDAT");
  } catch (const std::exception& e) {
    throw DataError("cannot read dataset cache: " + std::string(e.what()));
  }
  if (c.fields.size() != 1 || c.fields[0] != static_cast<std::int32_t>(c.records.size())) {
    throw DataError("dataset cache header does not match its records");
  }
  Dataset ds;
  for (auto& r : c.records) {
    if (r.shape.size() != 3 || r.shape[0] != 3 || r.shape[1] % 2 != 0 || r.shape[2] % 2 != 0) {
      throw DataError("cache record '" + r.name + "' is not an even-sized RGB tile");
    }
    ds.tiles.push_back({r.name, r.shape[1], r.shape[2], std::move(r.values)});
  }
  if (ds.tiles.empty()) throw DataError("dataset cache is empty");
  ds.split.assign(ds.tiles.size(), Split::kTrain);
  return ds;
}

}  // namespace wavelatent
