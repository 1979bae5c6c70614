#include "wavelatent/model.hpp"

#include <cmath>

namespace wavelatent {

Architecture parse_architecture(std::string_view name) {
  if (name == "baseline") return Architecture::kBaseline;
  if (name == "expdwt") return Architecture::kExpDwt;
  throw ConfigError("unknown architecture '" + std::string(name) + "' (expected baseline|expdwt)");
}

std::string_view architecture_name(Architecture a) { return a == Architecture::kBaseline ? "baseline" : "expdwt"; }

BranchWeights parse_branch_weights(std::string_view name) {
  if (name == "shared") return BranchWeights::kShared;
  if (name == "independent") return BranchWeights::kIndependent;
  throw ConfigError("unknown frequency_branch_weights '" + std::string(name) + "' (expected shared|independent)");
}

std::string_view branch_weights_name(BranchWeights w) {
  return w == BranchWeights::kShared ? "shared" : "independent";
}

void EncoderConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) throw ConfigError(std::string(what) + " must be positive, got " + std::to_string(v));
  };
  positive(in_channels, "in_channels");
  positive(base_channels, "base_channels");
  positive(latent_channels, "latent_channels");
  positive(input_size, "input_size");
  if (num_downsamples < 1 || num_downsamples > 8) {
    throw ConfigError("num_downsamples must be in [1, 8], got " + std::to_string(num_downsamples));
  }
  const int align = 1 << (num_downsamples + 1);
  if (input_size % align != 0) {
    throw ConfigError("input_size " + std::to_string(input_size) + " must be divisible by 2^(num_downsamples+1) = " +
                      std::to_string(align));
  }
}

namespace {

ConvLayer make_conv(std::string name, int in_ch, int out_ch, int kernel, int stride, Rng& rng, bool zero) {
  ConvLayer layer;
  layer.name = std::move(name);
  layer.stride = stride;
  layer.padding = kernel / 2;
  const int fan_in = in_ch * kernel * kernel;
  const double std_dev = std::sqrt(2.0 / fan_in);
  std::vector<float> w(static_cast<std::size_t>(out_ch) * fan_in, 0.0f);
  if (!zero) {
    for (float& v : w) v = static_cast<float>(std_dev * rng.normal());
  }
  layer.weight = Tensor::from({out_ch, in_ch, kernel, kernel}, std::move(w), true);
  layer.bias = Tensor::zeros({out_ch}, true);
  return layer;
}

std::vector<ConvLayer> build_encoder(const EncoderConfig& cfg, const std::string& prefix, Rng& rng) {
  std::vector<ConvLayer> layers;
  int channels = cfg.in_channels;
  for (int s = 0; s < cfg.num_downsamples; ++s) {
    const int out = cfg.stage_channels(s);
    const std::string stage = prefix + ".stage" + std::to_string(s);
    layers.push_back(make_conv(stage + ".conv", channels, out, 3, 1, rng, false));
    layers.push_back(make_conv(stage + ".down", out, out, 3, 2, rng, false));
    channels = out;
  }
  layers.push_back(make_conv(prefix + ".out", channels, cfg.feature_channels(), 3, 1, rng, false));
  return layers;
}

std::vector<ConvLayer> build_decoder(const EncoderConfig& cfg, Rng& rng) {
  std::vector<ConvLayer> layers;
  int channels = cfg.stage_channels(cfg.num_downsamples - 1);
  layers.push_back(make_conv("decoder.in", cfg.latent_channels, channels, 3, 1, rng, false));
  for (int s = cfg.num_downsamples - 1; s >= 0; --s) {
    const int out = cfg.stage_channels(s);
    const std::string stage = "decoder.stage" + std::to_string(s);
    layers.push_back(make_conv(stage + ".conv", channels, out, 3, 1, rng, false));
    layers.push_back(make_conv(stage + ".refine", out, out, 3, 1, rng, false));
    channels = out;
  }
  layers.push_back(make_conv("decoder.out", channels, cfg.in_channels, 3, 1, rng, false));
  return layers;
}

Tensor apply(Tape& tape, const ConvLayer& layer, const Tensor& x) {
  return ops::conv2d(tape, x, layer.weight, layer.bias, layer.stride, layer.padding);
}

}  // namespace

VaeModel::VaeModel(EncoderConfig config, Architecture arch, Rng& init_rng) : config_(config), arch_(arch) {
  config_.validate();
  encoder_ = build_encoder(config_, "encoder", init_rng);
  if (arch_ == Architecture::kExpDwt && config_.frequency_branch_weights == BranchWeights::kIndependent) {
    for (const char* band : {"ll", "lh", "hl", "hh"}) {
      band_encoders_.push_back(build_encoder(config_, std::string("frequency.") + band, init_rng));
    }
  }
  const int width = config_.feature_channels();
  posterior_map_ = make_conv("posterior.q", width, 2 * config_.latent_channels, 1, 1, init_rng, true);
  decoder_ = build_decoder(config_, init_rng);
}

std::vector<NamedParameter> VaeModel::parameters() const {
  std::vector<NamedParameter> out;
  auto add = [&out](const ConvLayer& l) {
    out.push_back({l.name + ".weight", l.weight});
    out.push_back({l.name + ".bias", l.bias});
  };
  for (const auto& l : encoder_) add(l);
  for (const auto& branch : band_encoders_) {
    for (const auto& l : branch) add(l);
  }
  add(posterior_map_);
  for (const auto& l : decoder_) add(l);
  return out;
}

std::size_t VaeModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

Tensor VaeModel::parameter(std::string_view name) const {
  for (auto& p : parameters()) {
    if (p.name == name) return p.tensor;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

Shape VaeModel::latent_shape(int batch) const {
  return {batch, config_.latent_channels, config_.latent_size(), config_.latent_size()};
}

void VaeModel::check_input(const Tensor& x) const {
  const Shape expected{x.rank() == 4 ? x.dim(0) : 1, config_.in_channels, config_.input_size, config_.input_size};
  if (x.shape() != expected) {
    throw ShapeError("model input " + to_string(x.shape()) + " does not match config " + to_string(expected));
  }
}

Tensor VaeModel::run_encoder(Tape& tape, const std::vector<ConvLayer>& layers, const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    h = ops::activation(tape, apply(tape, layers[i], h), config_.activation);
  }
  return apply(tape, layers.back(), h);
}

Tensor VaeModel::encode_spatial(Tape& tape, const Tensor& x) const {
  check_input(x);
  return run_encoder(tape, encoder_, x);
}

Tensor VaeModel::encode_frequency(Tape& tape, const Tensor& x) const {
  check_input(x);
  return encode_bands(tape, dwt2(tape, x));
}

Tensor VaeModel::encode_bands(Tape& tape, const SubBandSet& bands) const {
  const int half = config_.input_size / 2;
  const Shape expected{bands.ll.dim(0), config_.in_channels, half, half};
  const auto list = bands.bands();
  for (const Tensor* b : list) {
    if (b->shape() != expected) {
      throw ShapeError("sub-band " + to_string(b->shape()) + " does not match " + to_string(expected));
    }
  }
  SubBandSet encoded;
  std::array<Tensor*, 4> outs{&encoded.ll, &encoded.lh, &encoded.hl, &encoded.hh};
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& weights = band_encoders_.empty() ? encoder_ : band_encoders_[k];
    *outs[k] = run_encoder(tape, weights, *list[k]);
  }
  encoded.source_height = config_.latent_size();
  encoded.source_width = config_.latent_size();
  return idwt2(tape, encoded);
}

GaussianPosterior VaeModel::posterior(Tape& tape, const Tensor& features) const {
  if (features.rank() != 4 || features.dim(1) != config_.feature_channels()) {
    throw ShapeError("posterior map expects " + std::to_string(config_.feature_channels()) +
                     " feature channels, got " + to_string(features.shape()));
  }
  const Tensor params = apply(tape, posterior_map_, features);
  const int c = config_.latent_channels;
  if (params.dim(1) != 2 * c) {
    throw ShapeError("posterior map produced " + std::to_string(params.dim(1)) + " channels, expected 2c = " +
                     std::to_string(2 * c));
  }
  GaussianPosterior post;
  post.mean = ops::slice_channels(tape, params, 0, c);
  post.log_var = ops::clamp(tape, ops::slice_channels(tape, params, c, c), GaussianPosterior::kMinLogVar,
                            GaussianPosterior::kMaxLogVar);
  return post;
}

Tensor VaeModel::decode(Tape& tape, const Tensor& z) const {
  const Shape expected = latent_shape(z.rank() == 4 ? z.dim(0) : 1);
  if (z.shape() != expected) {
    throw ShapeError("latent " + to_string(z.shape()) + " does not match " + to_string(expected));
  }
  Tensor h = ops::activation(tape, apply(tape, decoder_[0], z), config_.activation);
  std::size_t i = 1;
  for (int s = 0; s < config_.num_downsamples; ++s) {
    h = ops::upsample2x(tape, h);
    h = ops::activation(tape, apply(tape, decoder_[i++], h), config_.activation);
    h = ops::activation(tape, apply(tape, decoder_[i++], h), config_.activation);
  }
  return ops::tanh(tape, apply(tape, decoder_[i], h));
}

ForwardResult VaeModel::forward(Tape& tape, const Tensor& x, const Tensor& noise, ForwardOptions options) const {
  ForwardResult r;
  Tensor m = encode_spatial(tape, x);
  if (arch_ == Architecture::kExpDwt) {
    Tensor m_s;
    if (options.zero_frequency_bands) {
      const int half = config_.input_size / 2;
      const Shape band{x.dim(0), config_.in_channels, half, half};
      m_s = encode_bands(tape, SubBandSet{Tensor::zeros(band), Tensor::zeros(band), Tensor::zeros(band),
                                          Tensor::zeros(band), config_.input_size, config_.input_size});
    } else {
      m_s = encode_frequency(tape, x);
    }
    r.features = fuse(tape, m, m_s);
  } else {
    r.features = m;
  }
  r.posterior = posterior(tape, r.features);
  r.latent = sample(tape, r.posterior, noise);
  r.reconstruction = decode(tape, r.latent);
  return r;
}

ForwardResult VaeModel::forward(Tape& tape, const Tensor& x, Rng& sampling_rng, ForwardOptions options) const {
  check_input(x);
  return forward(tape, x, sampling_rng.normal_tensor(latent_shape(x.dim(0))), options);
}

Tensor fuse(Tape& tape, const Tensor& m, const Tensor& m_s) {
  require_same_shape(m, m_s, "fuse");
  return ops::add(tape, m, m_s);
}

Tensor sample(Tape& tape, const GaussianPosterior& posterior, Rng& rng) {
  return sample(tape, posterior, rng.normal_tensor(posterior.mean.shape()));
}

Tensor sample(Tape& tape, const GaussianPosterior& posterior, const Tensor& noise) {
  return ops::reparameterize(tape, posterior.mean, posterior.log_var, noise);
}

}  // namespace wavelatent
