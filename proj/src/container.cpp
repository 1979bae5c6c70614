#include "wavelatent/container.hpp"

#include <algorithm>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace wavelatent {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::array<std::uint8_t, sizeof(T)> raw{};
  std::memcpy(raw.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.insert(out.end(), raw.begin(), raw.end());
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    std::array<std::uint8_t, sizeof(T)> raw{};
    std::memcpy(raw.data(), bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw.data(), sizeof(T));
    return value;
  }

  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("container truncated at byte " + std::to_string(pos_));
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const Container& c) {
  std::vector<std::uint8_t> out(c.magic.begin(), c.magic.end());
  put<std::uint32_t>(out, c.version);
  put<std::int32_t>(out, c.tag);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.fields.size()));
  for (std::int32_t f : c.fields) put<std::int32_t>(out, f);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.records.size()));
  for (const auto& r : c.records) {
    if (r.values.size() != numel(r.shape)) {
      throw FormatError("record '" + r.name + "' has " + std::to_string(r.values.size()) +
                        " values for shape " + to_string(r.shape));
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (int d : r.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (float v : r.values) put<float>(out, v);
  }
  return out;
}

Container decode(const std::vector<std::uint8_t>& bytes, std::string_view expected_magic) {
  Reader in(bytes);
  Container c;
  const std::string magic = in.string(4);
  std::copy(magic.begin(), magic.end(), c.magic.begin());
  if (!expected_magic.empty() && magic != expected_magic) {
    throw FormatError("bad magic '" + magic + "', expected '" + std::string(expected_magic) + "'");
  }
  c.version = in.get<std::uint32_t>();
  c.tag = in.get<std::int32_t>();
  const auto n_fields = in.get<std::uint32_t>();
  in.need(static_cast<std::size_t>(n_fields) * 4);
  for (std::uint32_t i = 0; i < n_fields; ++i) c.fields.push_back(in.get<std::int32_t>());
  const auto n_records = in.get<std::uint32_t>();
  for (std::uint32_t r = 0; r < n_records; ++r) {
    Container::Record rec;
    rec.name = in.string(in.get<std::uint32_t>());
    const auto rank = in.get<std::uint32_t>();
    in.need(static_cast<std::size_t>(rank) * 4);
    std::size_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = in.get<std::uint32_t>();
      if (d == 0 || d > (1u << 30)) throw FormatError("record '" + rec.name + "' has invalid dimension");
      rec.shape.push_back(static_cast<int>(d));
      count *= d;
    }
    in.need(count * 4);
    rec.values.resize(count);
    for (float& v : rec.values) v = in.get<float>();
    c.records.push_back(std::move(rec));
  }
  if (!in.done()) throw FormatError("trailing bytes after last record");
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const auto bytes = encode(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Container read_container(const std::filesystem::path& path, std::string_view expected_magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes, expected_magic);
}

}  // namespace wavelatent
