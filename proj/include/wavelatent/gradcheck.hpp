#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wavelatent/losses.hpp"
#include "wavelatent/model.hpp"

namespace wavelatent {

struct GradcheckOptions {
  int input_size = 8;
  int base_channels = 2;
  int num_downsamples = 1;
  int latent_channels = 2;
  double epsilon = 1e-3;
  double tolerance = 1e-3;
  /// Large enough that the KL term visibly contributes to every gradient.
  double kl_weight = 0.5;
  ReconLoss recon = ReconLoss::kL1;
  Activation activation = Activation::kSilu;
  std::uint64_t seed = 0;
};

/// Finite-difference comparison for one tensor of parameters (or inputs).
struct TensorCheck {
  std::string arch;
  std::string name;
  std::string module;  // "conv", "posterior" or "dwt"
  std::size_t count = 0;
  /// ||analytic - numeric||_2 / max(||analytic||_2, ||numeric||_2).
  double rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradcheckReport {
  std::vector<TensorCheck> checks;
  double worst_error = 0.0;
  std::string worst_name;
  std::map<std::string, double> worst_by_module;
  bool passed = false;
};

/// Central differences of the full VAE loss (reconstruction + kl_weight * KL,
/// re-evaluated in double from the float network outputs) against the tape's
/// gradients, for every parameter of both architectures, the input gradient
/// of the expdwt model, and an isolated dwt2 -> idwt2 chain on odd and even
/// sizes. Parameters are re-drawn with non-zero biases and posterior map so
/// that every path carries gradient.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

/// VAE loss at fixed noise from an independent double-precision forward pass.
/// Only even input sizes are supported, as in the model.
double reference_loss(const VaeModel& model, const Tensor& x, const Tensor& noise, double kl_weight, ReconLoss recon);

/// Randomises every parameter (weights ~ N(0, 2/fan_in) scaled, biases and
/// the posterior map small and non-zero).
void randomize_for_gradcheck(VaeModel& model, Rng& rng);

}  // namespace wavelatent
