#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "wavelatent/gradcheck.hpp"
#include "wavelatent/losses.hpp"
#include "wavelatent/model.hpp"
#include "wavelatent/wavelet.hpp"

using namespace wavelatent;
using testutil::random_tensor;

namespace {

EncoderConfig tiny() {
  EncoderConfig cfg;
  cfg.input_size = 16;
  cfg.base_channels = 4;
  cfg.num_downsamples = 2;
  cfg.latent_channels = 3;
  return cfg;
}

VaeModel make(const EncoderConfig& cfg, Architecture arch, std::uint64_t seed = 0) {
  Rng rng = Rng::stream(seed, "init");
  return VaeModel(cfg, arch, rng);
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("config validation") {
    EncoderConfig cfg = tiny();
    CHECK_NOTHROW(cfg.validate());
    cfg.input_size = 20;  // not divisible by 2^(2+1)
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny();
    cfg.num_downsamples = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny();
    cfg.latent_channels = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(parse_architecture("vqvae"), ConfigError);
    CHECK(parse_architecture("expdwt") == Architecture::kExpDwt);
    CHECK(architecture_name(Architecture::kBaseline) == "baseline");
  }

  TEST_CASE("shared branch weights keep parameter sets identical") {
    const VaeModel base = make(tiny(), Architecture::kBaseline);
    const VaeModel exp = make(tiny(), Architecture::kExpDwt);
    const auto base_params = base.parameters();
    const auto exp_params = exp.parameters();
    REQUIRE(base_params.size() == exp_params.size());
    for (std::size_t i = 0; i < base_params.size(); ++i) {
      const auto& a = base_params[i];
      const auto& b = exp_params[i];
      CHECK(a.name == b.name);
      CHECK(a.tensor.shape() == b.tensor.shape());
      CHECK(std::equal(a.tensor.data().begin(), a.tensor.data().end(), b.tensor.data().begin()));
    }
    EncoderConfig indep = tiny();
    indep.frequency_branch_weights = BranchWeights::kIndependent;
    const VaeModel four = make(indep, Architecture::kExpDwt);
    CHECK(four.parameter_count() > exp.parameter_count());
    CHECK_NOTHROW(four.parameter("frequency.hh.out.weight"));
  }

  TEST_CASE("initialisation: zero biases and posterior map, fan-in scaled weights") {
    const VaeModel m = make(EncoderConfig{}, Architecture::kExpDwt);
    for (const auto& p : m.parameters()) {
      if (p.name.ends_with(".bias") || p.name.starts_with("posterior.")) {
        for (float v : p.tensor.data()) CHECK(v == 0.0f);
        continue;
      }
      const auto& s = p.tensor.shape();
      double var = 0.0;
      for (float v : p.tensor.data()) var += static_cast<double>(v) * v;
      var /= static_cast<double>(p.tensor.numel());
      const double expected = 2.0 / (s[1] * s[2] * s[3]);
      if (p.tensor.numel() >= 1000) CHECK(var == doctest::Approx(expected).epsilon(0.15));
    }
    const VaeModel again = make(EncoderConfig{}, Architecture::kExpDwt);
    CHECK(std::equal(m.parameters()[0].tensor.data().begin(), m.parameters()[0].tensor.data().end(),
                     again.parameters()[0].tensor.data().begin()));
  }

  TEST_CASE("forward shapes and output range") {
    std::mt19937_64 gen(1);
    for (Architecture arch : {Architecture::kBaseline, Architecture::kExpDwt}) {
      const VaeModel m = make(tiny(), arch);
      const Tensor x = random_tensor(gen, {3, 3, 16, 16});
      Rng rng = Rng::stream(0, "sampling");
      Tape tape(Tape::Mode::kInference);
      const ForwardResult r = m.forward(tape, x, rng);
      CHECK(r.features.shape() == Shape{3, 6, 4, 4});
      CHECK(r.posterior.mean.shape() == Shape{3, 3, 4, 4});
      CHECK(r.latent.shape() == m.latent_shape(3));
      CHECK(r.reconstruction.shape() == x.shape());
      for (float v : r.reconstruction.data()) {
        CHECK(v >= -1.0f);
        CHECK(v <= 1.0f);
      }
      CHECK_THROWS_AS(m.forward(tape, random_tensor(gen, {1, 3, 8, 8}), rng), ShapeError);
    }
  }

  TEST_CASE("frequency branch is idwt2 of the per-band encodings") {
    std::mt19937_64 gen(2);
    const VaeModel m = make(tiny(), Architecture::kExpDwt);
    const Tensor x = random_tensor(gen, {2, 3, 16, 16});
    Tape tape(Tape::Mode::kInference);
    // Same init stream at half the input size gives the same weights, and its
    // spatial encoder accepts the 8x8 bands.
    EncoderConfig half = tiny();
    half.input_size = 8;
    const VaeModel band_model = make(half, Architecture::kBaseline);
    const SubBandSet b = dwt2(tape, x);
    const Tensor m_spatial = m.encode_spatial(tape, x);
    const SubBandSet enc{band_model.encode_spatial(tape, b.ll), band_model.encode_spatial(tape, b.lh),
                         band_model.encode_spatial(tape, b.hl), band_model.encode_spatial(tape, b.hh),
                         m_spatial.dim(2), m_spatial.dim(3)};
    const Tensor expected = idwt2(tape, enc);
    const Tensor got = m.encode_frequency(tape, x);
    REQUIRE(got.shape() == expected.shape());
    for (std::size_t i = 0; i < got.numel(); ++i) CHECK(got.data()[i] == expected.data()[i]);
  }

  TEST_CASE("log-variance is clamped") {
    EncoderConfig cfg = tiny();
    VaeModel m = make(cfg, Architecture::kBaseline);
    Tensor bias = m.parameter("posterior.q.bias");
    auto b = bias.mutable_data();
    for (int c = cfg.latent_channels; c < 2 * cfg.latent_channels; ++c) b[c] = 100.0f;
    Tape tape(Tape::Mode::kInference);
    const GaussianPosterior q = m.posterior(tape, Tensor::zeros({1, cfg.feature_channels(), 2, 2}));
    for (float v : q.log_var.data()) CHECK(v == GaussianPosterior::kMaxLogVar);
  }

  TEST_CASE("every encoder weight receives gradient through the band paths") {
    std::mt19937_64 gen(3);
    VaeModel m = make(tiny(), Architecture::kExpDwt);
    const Tensor x = random_tensor(gen, {2, 3, 16, 16});
    Tape tape;
    const Tensor fs = m.encode_frequency(tape, x);
    Tensor loss = ops::sum(tape, ops::mul(tape, fs, random_tensor(gen, fs.shape())));
    tape.backward(loss);
    std::set<std::string> seen;
    for (const auto& p : m.parameters()) {
      if (!p.name.starts_with("encoder.") || !p.name.ends_with(".weight")) continue;
      double norm = 0.0;
      for (float g : p.tensor.grad()) norm += std::fabs(g);
      CHECK_MESSAGE(norm > 0.0, p.name);
      seen.insert(p.name);
    }
    CHECK(seen.size() == 5);  // two stages x (conv, down) + out
  }

  TEST_CASE("double reference forward agrees with the float model") {
    std::mt19937_64 gen(4);
    for (auto branch : {BranchWeights::kShared, BranchWeights::kIndependent}) {
      for (auto act : {Activation::kSilu, Activation::kRelu}) {
        for (auto arch : {Architecture::kBaseline, Architecture::kExpDwt}) {
          EncoderConfig cfg = tiny();
          cfg.frequency_branch_weights = branch;
          cfg.activation = act;
          VaeModel m = make(cfg, arch, 2);
          Rng draw = Rng::stream(2, "draw");
          randomize_for_gradcheck(m, draw);
          const Tensor x = random_tensor(gen, {2, 3, 16, 16});
          const Tensor noise = random_tensor(gen, m.latent_shape(2));
          for (ReconLoss recon : {ReconLoss::kL1, ReconLoss::kL2}) {
            Tape tape(Tape::Mode::kInference);
            const LossTerms t = vae_loss(tape, x, m.forward(tape, x, noise), 0.5f, recon);
            CHECK(reference_loss(m, x, noise, 0.5, recon) == doctest::Approx(t.total.item()).epsilon(1e-5));
          }
        }
      }
    }
  }
}
