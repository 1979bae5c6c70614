#pragma once

#include <span>
#include <string>

#include <json.hpp>

#include "wavelatent/tensor.hpp"

namespace wavelatent {

/// Reported when the two images are identical (zero MSE), and the ceiling
/// for every other pair.
inline constexpr double kPsnrCapDb = 100.0;

/// Population variance of each latent element across the samples, averaged
/// over elements. Each tensor is one sample's posterior mean. Needs >= 2
/// samples of equal size.
double latent_variance(std::span<const Tensor> means);

/// 10 log10(range^2 / MSE), capped at kPsnrCapDb.
double psnr(const Tensor& x, const Tensor& y, double data_range = 2.0);

/// Single-scale SSIM of one image pair ([C,H,W] or [1,C,H,W]). Channels are
/// averaged to gray first; 11x11 Gaussian window (sigma 1.5), C1 = (0.01 L)^2,
/// C2 = (0.03 L)^2, mean over valid window positions.
double ssim(const Tensor& x, const Tensor& y, double data_range = 2.0);

struct MetricReport {
  std::string arch;
  double latent_variance = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  int num_eval_images = 0;
  std::string config_hash;
};

/// {"arch", "variance", "psnr_db", "ssim", "n", "config_hash"}.
nlohmann::json to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);
/// Empty string when `j` is a valid report, otherwise the first violation.
std::string validate_report_json(const nlohmann::json& j);

}  // namespace wavelatent
