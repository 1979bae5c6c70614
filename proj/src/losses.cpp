#include "wavelatent/losses.hpp"

#include <cmath>
#include <sstream>

namespace wavelatent {

ReconLoss parse_recon_loss(std::string_view name) {
  if (name == "l1") return ReconLoss::kL1;
  if (name == "l2") return ReconLoss::kL2;
  throw ConfigError("unknown reconstruction loss '" + std::string(name) + "' (expected l1|l2)");
}

std::string_view recon_loss_name(ReconLoss r) { return r == ReconLoss::kL1 ? "l1" : "l2"; }

Tensor recon_loss(Tape& tape, const Tensor& target, const Tensor& reconstruction, ReconLoss kind) {
  return kind == ReconLoss::kL1 ? ops::l1_loss(tape, reconstruction, target)
                                : ops::mse_loss(tape, reconstruction, target);
}

Tensor kl_loss(Tape& tape, const GaussianPosterior& posterior) {
  return ops::kl_divergence(tape, posterior.mean, posterior.log_var);
}

LossTerms vae_loss(Tape& tape, const Tensor& target, const ForwardResult& forward, float kl_weight, ReconLoss kind) {
  LossTerms terms;
  terms.recon = recon_loss(tape, target, forward.reconstruction, kind);
  terms.kl = kl_loss(tape, forward.posterior);
  terms.total = ops::add(tape, terms.recon, ops::scale(tape, terms.kl, kl_weight));
  return terms;
}

void require_finite(const LossBreakdown& loss) {
  auto check = [](double v, const char* term) {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "non-finite " << term << " loss (" << v << ")";
      throw NumericalError(term, os.str());
    }
  };
  check(loss.recon, "recon");
  check(loss.kl, "kl");
  check(loss.total, "total");
}

}  // namespace wavelatent
