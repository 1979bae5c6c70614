#include "wavelatent/wavelet.hpp"

#include <algorithm>

#include "wavelatent/ops.hpp"

namespace wavelatent {

namespace {

struct BandGeometry {
  int planes;
  int height, width;        // source
  int band_h, band_w;       // ceil(source / 2)

  // Source index of the second sample of pair `i`; mirrors past the edge.
  int row1(int i) const { return std::min(2 * i + 1, height - 1); }
  int col1(int j) const { return std::min(2 * j + 1, width - 1); }
};

// Forward butterfly on one 2x2 block; also the adjoint of the inverse.
inline void analyse(float a, float b, float c, float d, float& ll, float& lh, float& hl, float& hh) {
  const float lo_top = a + b;
  const float hi_top = a - b;
  const float lo_bot = c + d;
  const float hi_bot = c - d;
  ll = 0.5f * (lo_top + lo_bot);
  hl = 0.5f * (hi_top + hi_bot);
  lh = 0.5f * (lo_top - lo_bot);
  hh = 0.5f * (hi_top - hi_bot);
}

// Inverse butterfly; also the adjoint of the forward one.
inline void synthesise(float ll, float lh, float hl, float hh, float& a, float& b, float& c, float& d) {
  const float lo_top = ll + lh;
  const float lo_bot = ll - lh;
  const float hi_top = hl + hh;
  const float hi_bot = hl - hh;
  a = 0.5f * (lo_top + hi_top);
  b = 0.5f * (lo_top - hi_top);
  c = 0.5f * (lo_bot + hi_bot);
  d = 0.5f * (lo_bot - hi_bot);
}

}  // namespace

SubBandSet dwt2(Tape& tape, const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("dwt2: expected NCHW input, got " + to_string(x.shape()));
  if (x.dim(2) < 2 || x.dim(3) < 2) {
    throw ShapeError("dwt2: spatial dimensions must be at least 2, got " + to_string(x.shape()));
  }
  const BandGeometry g{x.dim(0) * x.dim(1), x.dim(2), x.dim(3), (x.dim(2) + 1) / 2, (x.dim(3) + 1) / 2};
  const std::size_t src_plane = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t band_plane = static_cast<std::size_t>(g.band_h) * g.band_w;
  std::array<std::vector<float>, 4> out;
  for (auto& o : out) o.resize(g.planes * band_plane);

  const float* src = x.data().data();
  for (int p = 0; p < g.planes; ++p) {
    const float* in = src + p * src_plane;
    for (int i = 0; i < g.band_h; ++i) {
      const float* r0 = in + static_cast<std::size_t>(2 * i) * g.width;
      const float* r1 = in + static_cast<std::size_t>(g.row1(i)) * g.width;
      for (int j = 0; j < g.band_w; ++j) {
        const int c0 = 2 * j;
        const int c1 = g.col1(j);
        const std::size_t o = p * band_plane + static_cast<std::size_t>(i) * g.band_w + j;
        analyse(r0[c0], r0[c1], r1[c0], r1[c1], out[0][o], out[1][o], out[2][o], out[3][o]);
      }
    }
  }

  const Shape band_shape{x.dim(0), x.dim(1), g.band_h, g.band_w};
  const bool grad = tape.should_record({&x});
  SubBandSet bands{Tensor::from(band_shape, std::move(out[0]), grad),
                   Tensor::from(band_shape, std::move(out[1]), grad),
                   Tensor::from(band_shape, std::move(out[2]), grad),
                   Tensor::from(band_shape, std::move(out[3]), grad),
                   g.height, g.width};
  if (!grad) return bands;

  tape.record("dwt2", [x, bands, g, src_plane, band_plane]() mutable {
    float* gx = x.mutable_grad().data();
    const float* gll = bands.ll.grad().data();
    const float* glh = bands.lh.grad().data();
    const float* ghl = bands.hl.grad().data();
    const float* ghh = bands.hh.grad().data();
    const float fault = testing::backward_fault_scale("dwt2");
    for (int p = 0; p < g.planes; ++p) {
      float* out = gx + p * src_plane;
      for (int i = 0; i < g.band_h; ++i) {
        float* r0 = out + static_cast<std::size_t>(2 * i) * g.width;
        float* r1 = out + static_cast<std::size_t>(g.row1(i)) * g.width;
        for (int j = 0; j < g.band_w; ++j) {
          const std::size_t o = p * band_plane + static_cast<std::size_t>(i) * g.band_w + j;
          float a, b, c, d;
          synthesise(fault * gll[o], fault * glh[o], fault * ghl[o], fault * ghh[o], a, b, c, d);
          const int c0 = 2 * j;
          const int c1 = g.col1(j);
          // Mirrored samples alias the same source element, so accumulate.
          r0[c0] += a;
          r0[c1] += b;
          r1[c0] += c;
          r1[c1] += d;
        }
      }
    }
  });
  return bands;
}

Tensor idwt2(Tape& tape, const SubBandSet& bands) {
  for (const Tensor* b : bands.bands()) {
    if (!b->defined()) throw ShapeError("idwt2: band tensor is undefined");
  }
  const Shape& shape = bands.ll.shape();
  if (shape.size() != 4) throw ShapeError("idwt2: expected NCHW bands, got " + to_string(shape));
  for (const Tensor* b : bands.bands()) {
    if (b->shape() != shape) {
      throw ShapeError("idwt2: mismatched band shapes " + to_string(shape) + " vs " + to_string(b->shape()));
    }
  }
  const BandGeometry g{shape[0] * shape[1], bands.source_height, bands.source_width, shape[2], shape[3]};
  if (g.height < 2 || g.width < 2 || (g.height + 1) / 2 != g.band_h || (g.width + 1) / 2 != g.band_w) {
    throw ShapeError("idwt2: source size " + std::to_string(g.height) + "x" + std::to_string(g.width) +
                     " inconsistent with band shape " + to_string(shape));
  }
  const std::size_t src_plane = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t band_plane = static_cast<std::size_t>(g.band_h) * g.band_w;
  std::vector<float> out(g.planes * src_plane);
  const float* ll = bands.ll.data().data();
  const float* lh = bands.lh.data().data();
  const float* hl = bands.hl.data().data();
  const float* hh = bands.hh.data().data();
  const bool odd_rows = g.height % 2 != 0;
  const bool odd_cols = g.width % 2 != 0;
  for (int p = 0; p < g.planes; ++p) {
    float* dst = out.data() + p * src_plane;
    for (int i = 0; i < g.band_h; ++i) {
      const bool has_r1 = !(odd_rows && i == g.band_h - 1);
      for (int j = 0; j < g.band_w; ++j) {
        const bool has_c1 = !(odd_cols && j == g.band_w - 1);
        const std::size_t o = p * band_plane + static_cast<std::size_t>(i) * g.band_w + j;
        float a, b, c, d;
        synthesise(ll[o], lh[o], hl[o], hh[o], a, b, c, d);
        float* r0 = dst + static_cast<std::size_t>(2 * i) * g.width + 2 * j;
        r0[0] = a;
        if (has_c1) r0[1] = b;
        if (has_r1) {
          float* r1 = r0 + g.width;
          r1[0] = c;
          if (has_c1) r1[1] = d;
        }
      }
    }
  }

  Tensor result = Tensor::from({shape[0], shape[1], g.height, g.width}, std::move(out),
                               tape.should_record({&bands.ll, &bands.lh, &bands.hl, &bands.hh}));
  if (!result.requires_grad()) return result;

  tape.record("idwt2", [bands, result, g, src_plane, band_plane, odd_rows, odd_cols]() mutable {
    const float* gx = result.grad().data();
    std::array<float*, 4> gb{};
    std::array<const Tensor*, 4> targets{&bands.ll, &bands.lh, &bands.hl, &bands.hh};
    for (int k = 0; k < 4; ++k) gb[k] = targets[k]->requires_grad() ? targets[k]->mutable_grad().data() : nullptr;
    const float fault = testing::backward_fault_scale("idwt2");
    for (int p = 0; p < g.planes; ++p) {
      const float* src = gx + p * src_plane;
      for (int i = 0; i < g.band_h; ++i) {
        const bool has_r1 = !(odd_rows && i == g.band_h - 1);
        for (int j = 0; j < g.band_w; ++j) {
          const bool has_c1 = !(odd_cols && j == g.band_w - 1);
          // Truncated samples carried no gradient: adjoint of the crop is a zero pad.
          const float* r0 = src + static_cast<std::size_t>(2 * i) * g.width + 2 * j;
          const float a = r0[0];
          const float b = has_c1 ? r0[1] : 0.0f;
          const float c = has_r1 ? r0[g.width] : 0.0f;
          const float d = (has_r1 && has_c1) ? r0[g.width + 1] : 0.0f;
          std::array<float, 4> v{};
          analyse(a, b, c, d, v[0], v[1], v[2], v[3]);
          const std::size_t o = p * band_plane + static_cast<std::size_t>(i) * g.band_w + j;
          for (int k = 0; k < 4; ++k) {
            if (gb[k]) gb[k][o] += fault * v[k];
          }
        }
      }
    }
  });
  return result;
}

std::array<double, 4> band_energy_fractions(const SubBandSet& bands) {
  std::array<double, 4> energy{};
  const auto list = bands.bands();
  for (int k = 0; k < 4; ++k) {
    for (float v : list[k]->data()) energy[k] += static_cast<double>(v) * v;
  }
  const double total = energy[0] + energy[1] + energy[2] + energy[3];
  if (total <= 0.0) return {0.0, 0.0, 0.0, 0.0};
  for (double& e : energy) e /= total;
  return energy;
}

}  // namespace wavelatent
