#include <doctest.h>

#include "helpers.hpp"
#include "wavelatent/ops.hpp"

using namespace wavelatent;
using testutil::check_grad;
using testutil::random_tensor;

namespace {

// Direct 7-loop convolution in double.
std::vector<double> conv_reference(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const int n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int co = w.dim(0), k = w.dim(2);
  const int ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(n) * co * ho * wo);
  for (int s = 0; s < n; ++s)
    for (int o = 0; o < co; ++o)
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx) {
          double acc = b.defined() ? b.data()[o] : 0.0;
          for (int c = 0; c < ci; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = y * stride + ky - pad, ix = xx * stride + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                acc += static_cast<double>(x.data()[((s * ci + c) * h + iy) * wd + ix]) *
                       w.data()[((o * ci + c) * k + ky) * k + kx];
              }
          out[((s * co + o) * ho + y) * wo + xx] = acc;
        }
  return out;
}

}  // namespace

TEST_SUITE("tensor-autodiff") {
  TEST_CASE("tensor handles share storage and clone deep-copies") {
    Tensor a = Tensor::full({2, 3}, 1.5f);
    Tensor b = a;
    CHECK(a.same_storage(b));
    b.mutable_data()[0] = 4.0f;
    CHECK(a.data()[0] == 4.0f);
    Tensor c = a.clone(true);
    CHECK_FALSE(c.same_storage(a));
    CHECK(c.requires_grad());
    CHECK(c.grad().size() == 6);
    CHECK(Tensor::scalar(2.0f).rank() == 0);
    CHECK(Tensor::scalar(2.0f).item() == 2.0f);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0f, 2.0f}), ShapeError);
    CHECK_THROWS_AS(a.item(), ShapeError);
  }

  TEST_CASE("tape rejects a second backward and non-scalar losses") {
    std::mt19937_64 gen(1);
    Tensor x = random_tensor(gen, {1, 1, 2, 2}, true);
    Tape tape;
    Tensor y = ops::scale(tape, x, 2.0f);
    CHECK_THROWS(tape.backward(y));
    Tensor s = ops::sum(tape, y);
    tape.backward(s);
    for (float g : x.grad()) CHECK(g == 2.0f);
    CHECK_THROWS(tape.backward(s));
  }

  TEST_CASE("inference tape records nothing") {
    std::mt19937_64 gen(2);
    Tensor x = random_tensor(gen, {1, 2, 4, 4}, true);
    Tape tape(Tape::Mode::kInference);
    Tensor y = ops::activation(tape, ops::scale(tape, x, 3.0f));
    CHECK(tape.size() == 0);
    CHECK_FALSE(y.requires_grad());
  }

  TEST_CASE("backward runs rules in reverse order") {
    std::mt19937_64 gen(3);
    Tensor x = random_tensor(gen, {1, 1, 2, 2}, true);
    Tape tape;
    Tensor s = ops::sum(tape, ops::tanh(tape, ops::scale(tape, x, 0.5f)));
    tape.backward(s);
    CHECK(tape.backward_trace() == std::vector<std::string>{"sum", "tanh", "scale"});
  }

  TEST_CASE("conv2d forward matches a direct loop") {
    std::mt19937_64 gen(4);
    struct Case {
      int ci, co, k, stride, pad, h, w;
      bool bias;
    };
    for (const Case c : {Case{3, 4, 3, 1, 1, 7, 6, true}, Case{2, 5, 3, 2, 1, 8, 8, true},
                         Case{4, 3, 1, 1, 0, 5, 5, true}, Case{2, 2, 3, 2, 0, 9, 7, false}}) {
      const Tensor x = random_tensor(gen, {2, c.ci, c.h, c.w});
      const Tensor w = random_tensor(gen, {c.co, c.ci, c.k, c.k});
      const Tensor b = c.bias ? random_tensor(gen, {c.co}) : Tensor();
      Tape tape(Tape::Mode::kInference);
      const Tensor y = ops::conv2d(tape, x, w, b, c.stride, c.pad);
      const auto ref = conv_reference(x, w, b, c.stride, c.pad);
      REQUIRE(y.numel() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-5));
    }
  }

  TEST_CASE("conv2d rejects mismatched channels") {
    std::mt19937_64 gen(5);
    Tape tape;
    CHECK_THROWS_AS(ops::conv2d(tape, random_tensor(gen, {1, 3, 4, 4}), random_tensor(gen, {2, 2, 3, 3}), Tensor(), 1, 1),
                    ShapeError);
  }

  TEST_CASE("conv2d gradients match finite differences") {
    std::mt19937_64 gen(6);
    for (int stride : {1, 2}) {
      Tensor x = random_tensor(gen, {2, 3, 6, 6}, true);
      Tensor w = random_tensor(gen, {4, 3, 3, 3}, true);
      Tensor b = random_tensor(gen, {4}, true);
      auto f = [&](Tape& t) { return ops::conv2d(t, x, w, b, stride, 1); };
      CHECK(check_grad(x, f, gen).rel_error() < 1e-3);
      CHECK(check_grad(w, f, gen).rel_error() < 1e-3);
      CHECK(check_grad(b, f, gen).rel_error() < 1e-3);
    }
    Tensor x = random_tensor(gen, {1, 4, 3, 3}, true);
    Tensor w = random_tensor(gen, {2, 4, 1, 1}, true);
    auto pointwise = [&](Tape& t) { return ops::conv2d(t, x, w, Tensor(), 1, 0); };
    CHECK(check_grad(x, pointwise, gen).rel_error() < 1e-3);
    CHECK(check_grad(w, pointwise, gen).rel_error() < 1e-3);
  }

  TEST_CASE("elementwise and resampling gradients match finite differences") {
    std::mt19937_64 gen(7);
    Tensor x = random_tensor(gen, {2, 4, 4, 4}, true, -2.0, 2.0);
    Tensor y = random_tensor(gen, {2, 4, 4, 4}, true);
    CHECK(check_grad(x, [&](Tape& t) { return ops::activation(t, x, Activation::kSilu); }, gen, 1e-3).rel_error() < 1e-3);
    CHECK(check_grad(x, [&](Tape& t) { return ops::tanh(t, x); }, gen, 1e-3).rel_error() < 1e-3);
    CHECK(check_grad(x, [&](Tape& t) { return ops::upsample2x(t, x); }, gen).rel_error() < 1e-4);
    CHECK(check_grad(x, [&](Tape& t) { return ops::slice_channels(t, x, 1, 2); }, gen).rel_error() < 1e-4);
    CHECK(check_grad(x, [&](Tape& t) { return ops::mul(t, x, y); }, gen).rel_error() < 1e-4);
    CHECK(check_grad(y, [&](Tape& t) { return ops::add(t, x, y); }, gen).rel_error() < 1e-4);
  }

  TEST_CASE("relu gradient is the indicator of positive inputs") {
    Tensor x = Tensor::from({1, 1, 1, 4}, {-1.0f, -0.5f, 0.5f, 2.0f}, true);
    Tape tape;
    Tensor s = ops::sum(tape, ops::activation(tape, x, Activation::kRelu));
    tape.backward(s);
    CHECK(std::vector<float>(x.grad().begin(), x.grad().end()) == std::vector<float>{0, 0, 1, 1});
  }

  TEST_CASE("clamp passes no gradient where it clips") {
    Tensor x = Tensor::from({4}, {-5.0f, -1.0f, 1.0f, 5.0f}, true);
    Tape tape;
    Tensor y = ops::clamp(tape, x, -2.0f, 2.0f);
    CHECK(y.data()[0] == -2.0f);
    CHECK(y.data()[3] == 2.0f);
    Tensor s = ops::sum(tape, y);
    tape.backward(s);
    CHECK(std::vector<float>(x.grad().begin(), x.grad().end()) == std::vector<float>{0, 1, 1, 0});
  }

  TEST_CASE("reparameterize gradients: d/dmu = 1, d/dlogvar = 0.5 sigma eps") {
    std::mt19937_64 gen(8);
    Tensor mu = random_tensor(gen, {2, 2, 3, 3}, true);
    Tensor lv = random_tensor(gen, {2, 2, 3, 3}, true);
    const Tensor eps = random_tensor(gen, {2, 2, 3, 3}, false, -2.0, 2.0);
    CHECK(check_grad(mu, [&](Tape& t) { return ops::reparameterize(t, mu, lv, eps); }, gen).rel_error() < 1e-4);
    CHECK(check_grad(lv, [&](Tape& t) { return ops::reparameterize(t, mu, lv, eps); }, gen, 1e-3).rel_error() < 1e-3);
    Tape tape;
    Tensor s = ops::sum(tape, ops::reparameterize(tape, mu, lv, eps));
    mu.zero_grad();
    lv.zero_grad();
    tape.backward(s);
    for (std::size_t i = 0; i < mu.numel(); ++i) {
      CHECK(mu.grad()[i] == 1.0f);
      CHECK(lv.grad()[i] == doctest::Approx(0.5 * std::exp(0.5 * lv.data()[i]) * eps.data()[i]).epsilon(1e-5));
    }
  }

  TEST_CASE("loss ops: values and gradients") {
    std::mt19937_64 gen(9);
    Tensor p = random_tensor(gen, {2, 3, 4, 4}, true);
    // Keep every residual away from the L1 kink so finite differences stay exact.
    std::vector<float> shifted(p.data().begin(), p.data().end());
    std::uniform_real_distribution<float> gap(0.1f, 0.5f);
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += (i % 2 ? gap(gen) : -gap(gen));
    const Tensor target = Tensor::from(p.shape(), shifted);
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double d = static_cast<double>(p.data()[i]) - target.data()[i];
      l1 += std::fabs(d);
      l2 += d * d;
    }
    Tape t(Tape::Mode::kInference);
    CHECK(ops::l1_loss(t, p, target).item() == doctest::Approx(l1 / p.numel()).epsilon(1e-6));
    CHECK(ops::mse_loss(t, p, target).item() == doctest::Approx(l2 / p.numel()).epsilon(1e-6));
    CHECK(check_grad(p, [&](Tape& tp) { return ops::mse_loss(tp, p, target); }, gen, 1e-3).rel_error() < 1e-3);
    CHECK(check_grad(p, [&](Tape& tp) { return ops::l1_loss(tp, p, target); }, gen, 1e-2).rel_error() < 1e-3);

    Tensor mu = random_tensor(gen, {2, 2, 2, 2}, true);
    Tensor lv = random_tensor(gen, {2, 2, 2, 2}, true);
    CHECK(check_grad(mu, [&](Tape& tp) { return ops::kl_divergence(tp, mu, lv); }, gen, 1e-3).rel_error() < 1e-3);
    CHECK(check_grad(lv, [&](Tape& tp) { return ops::kl_divergence(tp, mu, lv); }, gen, 1e-3).rel_error() < 1e-3);
  }

  TEST_CASE("injected backward fault perturbs only the named op") {
    std::mt19937_64 gen(10);
    Tensor x = random_tensor(gen, {1, 2, 4, 4}, true);
    Tensor w = random_tensor(gen, {2, 2, 3, 3}, true);
    auto f = [&](Tape& t) { return ops::conv2d(t, x, w, Tensor(), 1, 1); };
    testing::inject_backward_fault("conv2d", 1.5f);
    const double faulty = check_grad(w, f, gen).rel_error();
    testing::clear_backward_faults();
    CHECK(faulty > 0.1);
    CHECK(check_grad(w, f, gen).rel_error() < 1e-3);
    testing::inject_backward_fault("tanh", 2.0f);
    CHECK(check_grad(w, f, gen).rel_error() < 1e-3);
    testing::clear_backward_faults();
  }
}
