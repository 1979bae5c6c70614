#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wavelatent/ops.hpp"
#include "wavelatent/rng.hpp"
#include "wavelatent/tape.hpp"
#include "wavelatent/wavelet.hpp"

namespace wavelatent {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Architecture { kBaseline = 0, kExpDwt = 1 };
Architecture parse_architecture(std::string_view name);
std::string_view architecture_name(Architecture a);

/// Whether the four sub-band encoders reuse the spatial encoder's weights.
enum class BranchWeights { kShared = 0, kIndependent = 1 };
BranchWeights parse_branch_weights(std::string_view name);
std::string_view branch_weights_name(BranchWeights w);

struct EncoderConfig {
  int in_channels = 3;
  int base_channels = 16;
  int num_downsamples = 2;
  int latent_channels = 4;
  int input_size = 64;
  BranchWeights frequency_branch_weights = BranchWeights::kShared;
  Activation activation = Activation::kSilu;

  /// f = H / h.
  int downsampling_factor() const { return 1 << num_downsamples; }
  int latent_size() const { return input_size / downsampling_factor(); }
  /// Width c' of the pre-posterior feature map m (and m_s, m_e).
  int feature_channels() const { return 2 * latent_channels; }
  int stage_channels(int stage) const { return base_channels << stage; }

  /// Throws ConfigError. Requires H divisible by 2^(num_downsamples + 1) so
  /// that the half-resolution sub-band path stays aligned with the latent grid.
  void validate() const;

  bool operator==(const EncoderConfig&) const = default;
};

struct ConvLayer {
  std::string name;
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int padding = 1;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

/// Diagonal Gaussian q(z | m_e).
struct GaussianPosterior {
  Tensor mean;
  Tensor log_var;  // clamped to [kMinLogVar, kMaxLogVar]

  static constexpr float kMinLogVar = -30.0f;
  static constexpr float kMaxLogVar = 20.0f;
};

struct ForwardOptions {
  /// Feed the frequency branch four all-zero bands instead of dwt2(x).
  /// Isolates the architectural delta between the two variants.
  bool zero_frequency_bands = false;
};

struct ForwardResult {
  Tensor reconstruction;
  GaussianPosterior posterior;
  Tensor latent;
  Tensor features;  // m for baseline, m_e for expdwt
};

/// Baseline VAE or ExpDWT-VAE.
///
/// Encoder: per stage, conv3 -> act -> conv3/stride2 -> act, channels
/// doubling from base_channels, then conv3 to 2c channels. The posterior map
/// is a 1x1 conv 2c -> 2c split into (mean, log-variance). The decoder mirrors
/// the encoder with nearest upsampling and ends in tanh. The expdwt variant
/// adds idwt2 of the four encoded sub-bands to the spatial features before the
/// posterior map; with shared branch weights both variants have the same
/// parameters.
class VaeModel {
 public:
  /// Kaiming fan-in init for conv weights; zero biases and zero posterior map.
  VaeModel(EncoderConfig config, Architecture arch, Rng& init_rng);

  const EncoderConfig& config() const { return config_; }
  Architecture architecture() const { return arch_; }

  std::vector<NamedParameter> parameters() const;
  std::size_t parameter_count() const;
  /// Parameter by name; throws std::out_of_range.
  Tensor parameter(std::string_view name) const;

  Tensor encode_spatial(Tape& tape, const Tensor& x) const;
  Tensor encode_frequency(Tape& tape, const Tensor& x) const;
  /// Frequency branch from precomputed bands (sub-band encoders then idwt2).
  Tensor encode_bands(Tape& tape, const SubBandSet& bands) const;
  GaussianPosterior posterior(Tape& tape, const Tensor& features) const;
  Tensor decode(Tape& tape, const Tensor& z) const;

  ForwardResult forward(Tape& tape, const Tensor& x, const Tensor& noise, ForwardOptions options = {}) const;
  ForwardResult forward(Tape& tape, const Tensor& x, Rng& sampling_rng, ForwardOptions options = {}) const;

  Shape latent_shape(int batch) const;

 private:
  Tensor run_encoder(Tape& tape, const std::vector<ConvLayer>& layers, const Tensor& x) const;
  void check_input(const Tensor& x) const;

  EncoderConfig config_;
  Architecture arch_;
  std::vector<ConvLayer> encoder_;
  std::vector<std::vector<ConvLayer>> band_encoders_;  // independent branch weights only
  ConvLayer posterior_map_;
  std::vector<ConvLayer> decoder_;
};

/// m_e = m + m_s.
Tensor fuse(Tape& tape, const Tensor& m, const Tensor& m_s);

/// z = mean + exp(0.5 log_var) * noise, noise ~ N(0, I) from `rng`.
Tensor sample(Tape& tape, const GaussianPosterior& posterior, Rng& rng);
Tensor sample(Tape& tape, const GaussianPosterior& posterior, const Tensor& noise);

}  // namespace wavelatent
