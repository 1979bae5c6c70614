#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavelatent/tensor.hpp"

namespace wavelatent {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat little-endian binary container shared by checkpoints ("XDWT") and
/// dataset caches ("XDAT").
///
///   char[4]  magic
///   u32      format version
///   i32      tag
///   u32      field count, then i32 fields
///   u32      record count, then per record:
///              u32 name length, name bytes,
///              u32 rank, u32 dims[rank],
///              f32 values[prod(dims)]
struct Container {
  struct Record {
    std::string name;
    Shape shape;
    std::vector<float> values;
  };

  std::array<char, 4> magic{};
  std::uint32_t version = 1;
  std::int32_t tag = 0;
  std::vector<std::int32_t> fields;
  std::vector<Record> records;
};

std::vector<std::uint8_t> encode(const Container& c);
/// Rejects bad magic when `expected_magic` is non-empty, truncation and trailing bytes.
Container decode(const std::vector<std::uint8_t>& bytes, std::string_view expected_magic = {});

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path, std::string_view expected_magic = {});

}  // namespace wavelatent
