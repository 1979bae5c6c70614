#include "wavelatent/ops.hpp"

// Small products otherwise take a coefficient-wise path whose summation order
// depends on pointer alignment, which breaks run-to-run bit reproducibility.
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace wavelatent {

Activation parse_activation(std::string_view name) {
  if (name == "silu") return Activation::kSilu;
  if (name == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "' (expected silu|relu)");
}

std::string_view activation_name(Activation a) { return a == Activation::kSilu ? "silu" : "relu"; }

namespace testing {
namespace {
thread_local std::map<std::string, float, std::less<>> g_faults;
}

void inject_backward_fault(std::string_view op, float scale) { g_faults[std::string(op)] = scale; }
void clear_backward_faults() { g_faults.clear(); }
float backward_fault_scale(std::string_view op) {
  auto it = g_faults.find(op);
  return it == g_faults.end() ? 1.0f : it->second;
}
}  // namespace testing

namespace ops {
namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + to_string(t.shape()));
  }
}

struct ConvGeometry {
  int batch, in_ch, height, width;
  int out_ch, kernel, stride, padding;
  int out_h, out_w;
  int patch() const { return in_ch * kernel * kernel; }
  int positions() const { return out_h * out_w; }
  bool pointwise() const { return kernel == 1 && stride == 1 && padding == 0; }
};

void im2col(const float* image, const ConvGeometry& g, float* col) {
  const int k = g.kernel;
  for (int c = 0; c < g.in_ch; ++c) {
    const float* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * g.positions();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          float* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0f);
            continue;
          }
          const float* src = plane + static_cast<std::size_t>(iy) * g.width;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, const ConvGeometry& g, float* image) {
  const int k = g.kernel;
  for (int c = 0; c < g.in_ch; ++c) {
    float* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * g.positions();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          float* dst = plane + static_cast<std::size_t>(iy) * g.width;
          const float* src = row + oy * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

Tensor make_output(Tape& tape, Shape shape, std::vector<float> values,
                   std::initializer_list<const Tensor*> inputs) {
  return Tensor::from(std::move(shape), std::move(values), tape.should_record(inputs));
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(weight, 4, "conv2d", "weight");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be positive");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be non-negative");
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_ch = input.dim(1);
  g.height = input.dim(2);
  g.width = input.dim(3);
  g.out_ch = weight.dim(0);
  g.kernel = weight.dim(2);
  g.stride = stride;
  g.padding = padding;
  if (weight.dim(1) != g.in_ch) {
    throw ShapeError("conv2d: input has " + std::to_string(g.in_ch) + " channels but weight " +
                     to_string(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
  }
  if (weight.dim(3) != g.kernel || g.kernel % 2 == 0) {
    throw ShapeError("conv2d: kernel must be square and odd, got " + to_string(weight.shape()));
  }
  if (g.height + 2 * padding < g.kernel || g.width + 2 * padding < g.kernel) {
    throw ShapeError("conv2d: padded input " + to_string(input.shape()) + " smaller than kernel " +
                     std::to_string(g.kernel));
  }
  if (bias.defined() && bias.shape() != Shape{g.out_ch}) {
    throw ShapeError("conv2d: bias shape " + to_string(bias.shape()) + " does not match " +
                     std::to_string(g.out_ch) + " output channels");
  }
  g.out_h = (g.height + 2 * padding - g.kernel) / stride + 1;
  g.out_w = (g.width + 2 * padding - g.kernel) / stride + 1;

  const std::size_t in_plane = static_cast<std::size_t>(g.in_ch) * g.height * g.width;
  const std::size_t out_plane = static_cast<std::size_t>(g.out_ch) * g.positions();
  std::vector<float> out(static_cast<std::size_t>(g.batch) * out_plane);
  std::vector<float> col(g.pointwise() ? 0 : static_cast<std::size_t>(g.patch()) * g.positions());

  ConstMatMap w(weight.data().data(), g.out_ch, g.patch());
  const float* x = input.data().data();
  for (int n = 0; n < g.batch; ++n) {
    const float* col_ptr = x + n * in_plane;
    if (!g.pointwise()) {
      im2col(x + n * in_plane, g, col.data());
      col_ptr = col.data();
    }
    MatMap y(out.data() + n * out_plane, g.out_ch, g.positions());
    y.noalias() = w * ConstMatMap(col_ptr, g.patch(), g.positions());
    if (bias.defined()) {
      for (int c = 0; c < g.out_ch; ++c) y.row(c).array() += bias.data()[c];
    }
  }

  Tensor result = make_output(tape, {g.batch, g.out_ch, g.out_h, g.out_w}, std::move(out),
                              {&input, &weight, &bias});
  if (!result.requires_grad()) return result;

  tape.record("conv2d", [input, weight, bias, result, g, in_plane, out_plane]() mutable {
    const float fault = testing::backward_fault_scale("conv2d");
    std::vector<float> col(static_cast<std::size_t>(g.patch()) * g.positions());
    std::vector<float> dcol(input.requires_grad() ? col.size() : 0);
    ConstMatMap w(weight.data().data(), g.out_ch, g.patch());
    const float* x = input.data().data();
    const float* gy_all = result.grad().data();
    for (int n = 0; n < g.batch; ++n) {
      ConstMatMap gy(gy_all + n * out_plane, g.out_ch, g.positions());
      if (weight.requires_grad()) {
        const float* col_ptr = x + n * in_plane;
        if (!g.pointwise()) {
          im2col(x + n * in_plane, g, col.data());
          col_ptr = col.data();
        }
        MatMap gw(weight.mutable_grad().data(), g.out_ch, g.patch());
        if (fault == 1.0f) {
          gw.noalias() += gy * ConstMatMap(col_ptr, g.patch(), g.positions()).transpose();
        } else {
          gw.noalias() += fault * (gy * ConstMatMap(col_ptr, g.patch(), g.positions()).transpose());
        }
      }
      if (bias.defined() && bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (int c = 0; c < g.out_ch; ++c) {
          // Plain loop: Eigen's vectorised sum peels by alignment, so its order varies between runs.
          const float* row = gy_all + n * out_plane + static_cast<std::size_t>(c) * g.positions();
          float acc = 0.0f;
          for (int i = 0; i < g.positions(); ++i) acc += row[i];
          gb[c] += fault * acc;
        }
      }
      if (input.requires_grad()) {
        float* gx = input.mutable_grad().data() + n * in_plane;
        if (g.pointwise()) {
          MatMap gxm(gx, g.patch(), g.positions());
          gxm.noalias() += fault * (w.transpose() * gy);
        } else {
          MatMap dc(dcol.data(), g.patch(), g.positions());
          dc.noalias() = fault * (w.transpose() * gy);
          col2im_add(dcol.data(), g, gx);
        }
      }
    }
  });
  return result;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<float> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Tensor result = make_output(tape, a.shape(), std::move(out), {&a, &b});
  if (!result.requires_grad()) return result;
  tape.record("add", [a, b, result]() mutable {
    const float fault = testing::backward_fault_scale("add");
    const auto g = result.grad();
    for (const Tensor* t : {&a, &b}) {
      if (!t->requires_grad()) continue;
      auto gt = t->mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gt[i] += fault * g[i];
    }
  });
  return result;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<float> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Tensor result = make_output(tape, a.shape(), std::move(out), {&a, &b});
  if (!result.requires_grad()) return result;
  tape.record("mul", [a, b, result]() mutable {
    const auto g = result.grad();
    const auto av = a.data();
    const auto bv = b.data();
    if (a.requires_grad()) {
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      auto gb = b.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
  return result;
}

Tensor scale(Tape& tape, const Tensor& a, float factor) {
  std::vector<float> out(a.data().begin(), a.data().end());
  for (float& v : out) v *= factor;
  Tensor result = make_output(tape, a.shape(), std::move(out), {&a});
  if (!result.requires_grad()) return result;
  tape.record("scale", [a, result, factor]() mutable {
    const auto g = result.grad();
    auto ga = a.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
  return result;
}

Tensor sum(Tape& tape, const Tensor& a) {
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  Tensor result = make_output(tape, {}, {static_cast<float>(acc)}, {&a});
  if (!result.requires_grad()) return result;
  tape.record("sum", [a, result]() mutable {
    const float g = result.grad()[0];
    for (float& v : a.mutable_grad()) v += g;
  });
  return result;
}

Tensor activation(Tape& tape, const Tensor& x, Activation kind) {
  const auto xv = x.data();
  std::vector<float> out(xv.size());
  if (kind == Activation::kSilu) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] / (1.0f + std::exp(-xv[i]));
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
  }
  Tensor result = make_output(tape, x.shape(), std::move(out), {&x});
  if (!result.requires_grad()) return result;
  const char* name = kind == Activation::kSilu ? "silu" : "relu";
  tape.record(name, [x, result, kind, name]() mutable {
    const float fault = testing::backward_fault_scale(name);
    const auto g = result.grad();
    const auto xv = x.data();
    auto gx = x.mutable_grad();
    if (kind == Activation::kSilu) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        const float s = 1.0f / (1.0f + std::exp(-xv[i]));
        gx[i] += fault * g[i] * s * (1.0f + xv[i] * (1.0f - s));
      }
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xv[i] > 0.0f) gx[i] += fault * g[i];
      }
    }
  });
  return result;
}

Tensor tanh(Tape& tape, const Tensor& x) {
  std::vector<float> out(x.data().begin(), x.data().end());
  for (float& v : out) v = std::tanh(v);
  Tensor result = make_output(tape, x.shape(), std::move(out), {&x});
  if (!result.requires_grad()) return result;
  tape.record("tanh", [x, result]() mutable {
    const auto g = result.grad();
    const auto y = result.data();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0f - y[i] * y[i]);
  });
  return result;
}

Tensor upsample2x(Tape& tape, const Tensor& x) {
  require_rank(x, 4, "upsample2x", "input");
  const int planes = x.dim(0) * x.dim(1);
  const int h = x.dim(2);
  const int w = x.dim(3);
  std::vector<float> out(static_cast<std::size_t>(planes) * 4 * h * w);
  const float* src = x.data().data();
  for (int p = 0; p < planes; ++p) {
    const float* in = src + static_cast<std::size_t>(p) * h * w;
    float* o = out.data() + static_cast<std::size_t>(p) * 4 * h * w;
    for (int i = 0; i < 2 * h; ++i) {
      for (int j = 0; j < 2 * w; ++j) o[i * 2 * w + j] = in[(i / 2) * w + j / 2];
    }
  }
  Tensor result = make_output(tape, {x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out), {&x});
  if (!result.requires_grad()) return result;
  tape.record("upsample2x", [x, result, planes, h, w]() mutable {
    const float* g = result.grad().data();
    float* gx = x.mutable_grad().data();
    for (int p = 0; p < planes; ++p) {
      const float* gp = g + static_cast<std::size_t>(p) * 4 * h * w;
      float* gxp = gx + static_cast<std::size_t>(p) * h * w;
      for (int i = 0; i < 2 * h; ++i) {
        for (int j = 0; j < 2 * w; ++j) gxp[(i / 2) * w + j / 2] += gp[i * 2 * w + j];
      }
    }
  });
  return result;
}

Tensor slice_channels(Tape& tape, const Tensor& x, int begin, int count) {
  require_rank(x, 4, "slice_channels", "input");
  const int channels = x.dim(1);
  if (begin < 0 || count <= 0 || begin + count > channels) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + to_string(x.shape()));
  }
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  const int batch = x.dim(0);
  std::vector<float> out(static_cast<std::size_t>(batch) * count * plane);
  const float* src = x.data().data();
  for (int n = 0; n < batch; ++n) {
    std::copy_n(src + (static_cast<std::size_t>(n) * channels + begin) * plane, count * plane,
                out.data() + static_cast<std::size_t>(n) * count * plane);
  }
  Tensor result = make_output(tape, {batch, count, x.dim(2), x.dim(3)}, std::move(out), {&x});
  if (!result.requires_grad()) return result;
  tape.record("slice_channels", [x, result, begin, count, channels, plane, batch]() mutable {
    const float* g = result.grad().data();
    float* gx = x.mutable_grad().data();
    for (int n = 0; n < batch; ++n) {
      float* dst = gx + (static_cast<std::size_t>(n) * channels + begin) * plane;
      const float* s = g + static_cast<std::size_t>(n) * count * plane;
      for (std::size_t i = 0; i < count * plane; ++i) dst[i] += s[i];
    }
  });
  return result;
}

Tensor clamp(Tape& tape, const Tensor& x, float lo, float hi) {
  std::vector<float> out(x.data().begin(), x.data().end());
  for (float& v : out) v = std::clamp(v, lo, hi);
  Tensor result = make_output(tape, x.shape(), std::move(out), {&x});
  if (!result.requires_grad()) return result;
  tape.record("clamp", [x, result, lo, hi]() mutable {
    const auto g = result.grad();
    const auto xv = x.data();
    auto gx = x.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (xv[i] >= lo && xv[i] <= hi) gx[i] += g[i];
    }
  });
  return result;
}

Tensor reparameterize(Tape& tape, const Tensor& mu, const Tensor& log_var, const Tensor& noise) {
  require_same_shape(mu, log_var, "reparameterize");
  require_same_shape(mu, noise, "reparameterize");
  const auto m = mu.data();
  const auto lv = log_var.data();
  const auto e = noise.data();
  std::vector<float> out(m.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = m[i] + std::exp(0.5f * lv[i]) * e[i];
  Tensor result = make_output(tape, mu.shape(), std::move(out), {&mu, &log_var});
  if (!result.requires_grad()) return result;
  tape.record("reparameterize", [mu, log_var, noise, result]() mutable {
    const float fault = testing::backward_fault_scale("reparameterize");
    const auto g = result.grad();
    if (mu.requires_grad()) {
      auto gm = mu.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
    }
    if (log_var.requires_grad()) {
      const auto lv = log_var.data();
      const auto e = noise.data();
      auto gl = log_var.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        gl[i] += fault * g[i] * 0.5f * std::exp(0.5f * lv[i]) * e[i];
      }
    }
  });
  return result;
}

Tensor l1_loss(Tape& tape, const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "l1_loss");
  const auto p = pred.data();
  const auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::fabs(static_cast<double>(p[i]) - t[i]);
  const double n = static_cast<double>(p.size());
  Tensor result = make_output(tape, {}, {static_cast<float>(acc / n)}, {&pred, &target});
  if (!result.requires_grad()) return result;
  tape.record("l1_loss", [pred, target, result, n]() mutable {
    const float fault = testing::backward_fault_scale("l1_loss");
    const float g = fault * result.grad()[0] / static_cast<float>(n);
    const auto p = pred.data();
    const auto t = target.data();
    auto sign = [](float d) { return d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f); };
    if (pred.requires_grad()) {
      auto gp = pred.mutable_grad();
      for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g * sign(p[i] - t[i]);
    }
    if (target.requires_grad()) {
      auto gt = target.mutable_grad();
      for (std::size_t i = 0; i < p.size(); ++i) gt[i] -= g * sign(p[i] - t[i]);
    }
  });
  return result;
}

Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse_loss");
  const auto p = pred.data();
  const auto t = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    acc += d * d;
  }
  const double n = static_cast<double>(p.size());
  Tensor result = make_output(tape, {}, {static_cast<float>(acc / n)}, {&pred, &target});
  if (!result.requires_grad()) return result;
  tape.record("mse_loss", [pred, target, result, n]() mutable {
    const float g = result.grad()[0] * 2.0f / static_cast<float>(n);
    const auto p = pred.data();
    const auto t = target.data();
    if (pred.requires_grad()) {
      auto gp = pred.mutable_grad();
      for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g * (p[i] - t[i]);
    }
    if (target.requires_grad()) {
      auto gt = target.mutable_grad();
      for (std::size_t i = 0; i < p.size(); ++i) gt[i] -= g * (p[i] - t[i]);
    }
  });
  return result;
}

Tensor kl_divergence(Tape& tape, const Tensor& mu, const Tensor& log_var) {
  require_same_shape(mu, log_var, "kl_divergence");
  if (mu.rank() == 0) throw ShapeError("kl_divergence: posterior needs a batch axis");
  const auto m = mu.data();
  const auto lv = log_var.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double l = lv[i];
    acc += 0.5 * (static_cast<double>(m[i]) * m[i] + std::exp(l) - 1.0 - l);
  }
  const int batch = mu.dim(0);
  Tensor result = make_output(tape, {}, {static_cast<float>(acc / batch)}, {&mu, &log_var});
  if (!result.requires_grad()) return result;
  tape.record("kl_divergence", [mu, log_var, result, batch]() mutable {
    const float fault = testing::backward_fault_scale("kl_divergence");
    const float g = fault * result.grad()[0] / static_cast<float>(batch);
    const auto m = mu.data();
    const auto lv = log_var.data();
    if (mu.requires_grad()) {
      auto gm = mu.mutable_grad();
      for (std::size_t i = 0; i < m.size(); ++i) gm[i] += g * m[i];
    }
    if (log_var.requires_grad()) {
      auto gl = log_var.mutable_grad();
      for (std::size_t i = 0; i < m.size(); ++i) gl[i] += g * 0.5f * (std::exp(lv[i]) - 1.0f);
    }
  });
  return result;
}

}  // namespace ops
}  // namespace wavelatent
