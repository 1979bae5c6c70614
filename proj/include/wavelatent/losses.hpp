#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "wavelatent/model.hpp"

namespace wavelatent {

enum class ReconLoss { kL1, kL2 };
ReconLoss parse_recon_loss(std::string_view name);
std::string_view recon_loss_name(ReconLoss r);

/// Per-batch scalar means; total = recon + kl_weight * kl.
struct LossBreakdown {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

struct LossTerms {
  Tensor total;
  Tensor recon;
  Tensor kl;

  LossBreakdown values() const { return {total.item(), recon.item(), kl.item()}; }
};

/// Raised when a loss term stops being finite; `term()` names it.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string term, const std::string& what) : std::runtime_error(what), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

/// Pixel reconstruction loss: mean |x - x~| (L1) or mean (x - x~)^2 (L2).
Tensor recon_loss(Tape& tape, const Tensor& target, const Tensor& reconstruction, ReconLoss kind = ReconLoss::kL1);

/// KL to the standard normal prior: per-sample sum of
/// 0.5 (mu^2 + sigma^2 - 1 - log sigma^2), averaged over the batch.
Tensor kl_loss(Tape& tape, const GaussianPosterior& posterior);

LossTerms vae_loss(Tape& tape, const Tensor& target, const ForwardResult& forward, float kl_weight,
                   ReconLoss kind = ReconLoss::kL1);

/// Throws NumericalError naming the first non-finite term.
void require_finite(const LossBreakdown& loss);

}  // namespace wavelatent
