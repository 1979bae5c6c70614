#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "wavelatent/ops.hpp"
#include "wavelatent/tape.hpp"

namespace testutil {

using wavelatent::Shape;
using wavelatent::Tape;
using wavelatent::Tensor;

inline Tensor random_tensor(std::mt19937_64& gen, Shape shape, bool grad = false, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<float> v(wavelatent::numel(shape));
  for (float& x : v) x = static_cast<float>(u(gen));
  return Tensor::from(std::move(shape), std::move(v), grad);
}

inline double probe_sum(const Tensor& y, const Tensor& probe) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) s += static_cast<double>(y.data()[i]) * probe.data()[i];
  return s;
}

/// Gradient of sum(probe * f(x)) w.r.t. `x`, by tape and by central differences.
struct GradPair {
  std::vector<double> analytic;
  std::vector<double> numeric;

  double rel_error() const {
    double d = 0, a = 0, n = 0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      d += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      a += analytic[i] * analytic[i];
      n += numeric[i] * numeric[i];
    }
    const double den = std::sqrt(std::max(a, n));
    return den > 0 ? std::sqrt(d) / den : std::sqrt(d);
  }
};

inline GradPair check_grad(const Tensor& x, const std::function<Tensor(Tape&)>& f, std::mt19937_64& gen,
                           double eps = 1e-2) {
  Tensor probe;
  {
    Tape t(Tape::Mode::kInference);
    probe = random_tensor(gen, f(t).shape());
  }
  x.zero_grad();
  Tape tape;
  Tensor loss = wavelatent::ops::sum(tape, wavelatent::ops::mul(tape, f(tape), probe));
  tape.backward(loss);
  GradPair out;
  out.analytic.assign(x.grad().begin(), x.grad().end());
  auto v = x.mutable_data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float orig = v[i];
    const float up = static_cast<float>(orig + eps), down = static_cast<float>(orig - eps);
    Tape t(Tape::Mode::kInference);
    v[i] = up;
    const double lp = probe_sum(f(t), probe);
    v[i] = down;
    const double lm = probe_sum(f(t), probe);
    v[i] = orig;
    out.numeric.push_back((lp - lm) / (static_cast<double>(up) - down));
  }
  return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("wavelatent_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& s) const { return path / s; }
};

}  // namespace testutil
