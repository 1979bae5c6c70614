#pragma once

#include <string_view>

#include "wavelatent/tape.hpp"
#include "wavelatent/tensor.hpp"

namespace wavelatent {

enum class Activation { kSilu, kRelu };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

namespace ops {

// Every op records its backward rule on `tape` when the tape is recording and
// at least one operand requires grad. The result then requires grad as well.

/// NCHW convolution with a square odd kernel; bias broadcasts over channels.
/// `bias` may be undefined for a bias-free layer.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, float factor);
Tensor sum(Tape& tape, const Tensor& a);

/// x * sigmoid(x) or max(x, 0).
Tensor activation(Tape& tape, const Tensor& x, Activation kind = Activation::kSilu);
Tensor tanh(Tape& tape, const Tensor& x);

/// Nearest-neighbour 2x spatial upsampling of an NCHW tensor.
Tensor upsample2x(Tape& tape, const Tensor& x);

/// Channels [begin, begin + count) of an NCHW tensor.
Tensor slice_channels(Tape& tape, const Tensor& x, int begin, int count);

/// Elementwise clamp; gradient is zero where the value was clipped.
Tensor clamp(Tape& tape, const Tensor& x, float lo, float hi);

/// mu + exp(0.5 * log_var) * noise. `noise` is treated as a constant.
Tensor reparameterize(Tape& tape, const Tensor& mu, const Tensor& log_var, const Tensor& noise);

/// Mean of |pred - target| over all elements.
Tensor l1_loss(Tape& tape, const Tensor& pred, const Tensor& target);
/// Mean of (pred - target)^2 over all elements.
Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target);

/// KL(N(mu, exp(log_var)) || N(0, I)): sum over latent elements, mean over
/// the leading batch axis.
Tensor kl_divergence(Tape& tape, const Tensor& mu, const Tensor& log_var);

}  // namespace ops

namespace testing {

/// Scales the gradient a named op's backward rule emits, on this thread only.
/// Negative control for gradient checking; `op` matches the tape entry name
/// (e.g. "conv2d").
void inject_backward_fault(std::string_view op, float scale);
void clear_backward_faults();
float backward_fault_scale(std::string_view op);

}  // namespace testing

}  // namespace wavelatent
