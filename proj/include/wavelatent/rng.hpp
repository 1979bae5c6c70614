#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "wavelatent/tensor.hpp"

namespace wavelatent {

/// Seeded random stream.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard. The
/// distribution mappings are implemented here rather than with <random>'s
/// distributions, whose algorithms are implementation-defined, so that a seed
/// yields the same values on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from a root seed and a stream name
  /// ("init", "sampling", "split", "synth", ...).
  static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  int integer(int lo, int hi_inclusive);
  /// Standard normal via the Box-Muller transform.
  double normal();

  Tensor normal_tensor(Shape shape);
  /// Fisher-Yates permutation of [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace wavelatent
