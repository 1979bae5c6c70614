#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavelatent/image_io.hpp"
#include "wavelatent/tensor.hpp"

namespace wavelatent {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split : std::uint8_t { kTrain = 0, kVal = 1 };

/// One preprocessed RGB tile, CHW, values in [-1, 1].
struct Tile {
  std::string source_id;
  int height = 0;
  int width = 0;
  std::vector<float> pixels;
};

struct Dataset {
  std::vector<Tile> tiles;
  std::vector<Split> split;  // one per tile; all kTrain until assign_splits
  std::size_t skipped_corrupt = 0;
  std::size_t rejected_non_rgb = 0;

  std::size_t size() const { return tiles.size(); }
  std::vector<std::size_t> indices(Split which) const;
};

/// byte -> v / 127.5 - 1.
float normalize_byte(std::uint8_t v);
/// Inverse of normalize_byte, rounded and clamped to [0, 255].
std::uint8_t denormalize_value(float v);

/// Tile from an RGB image already at its final size.
Tile tile_from_image(const ImageU8& image, std::string source_id);
ImageU8 image_from_chw(std::span<const float> chw, int height, int width);

/// Decodes every .png/.ppm in `dir` (lexicographic order), centre-crops to a
/// square and resizes to target_size. Corrupt files are skipped and counted;
/// grayscale files are rejected and counted. Throws DataError when nothing
/// loads. Decoding fans out over WAVELATENT_THREADS workers (default 1).
Dataset load_folder(const std::filesystem::path& dir, int target_size);

/// Marks round(n * val_fraction) tiles (at least one when n >= 2 and the
/// fraction is positive) as validation, chosen by a seeded permutation.
/// Depends only on (n, seed, fraction).
std::vector<Split> make_splits(std::size_t n, std::uint64_t seed, double val_fraction);
void assign_splits(Dataset& dataset, std::uint64_t seed, double val_fraction);

/// Stacks tiles into an N x 3 x H x W tensor.
Tensor make_batch(const Dataset& dataset, std::span<const std::size_t> indices);

/// Dataset cache: the checkpoint container with magic "XDAT"; one record per
/// tile named by source id, shape [3, H, W].
void save_dataset_cache(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset_cache(const std::filesystem::path& path);

/// Reads WAVELATENT_THREADS; 1 when unset or invalid.
int data_threads();

}  // namespace wavelatent
