#include "wavelatent/metrics.hpp"

#include <array>
#include <cmath>
#include <set>

namespace wavelatent {

double latent_variance(std::span<const Tensor> means) {
  if (means.size() < 2) throw std::invalid_argument("latent_variance needs at least 2 samples");
  const std::size_t n = means.front().numel();
  for (const auto& m : means) {
    if (m.numel() != n) throw ShapeError("latent_variance: samples differ in size");
  }
  const double count = static_cast<double>(means.size());
  double total = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    double mean = 0.0;
    for (const auto& m : means) mean += m.data()[e];
    mean /= count;
    double var = 0.0;
    for (const auto& m : means) {
      const double d = m.data()[e] - mean;
      var += d * d;
    }
    total += var / count;
  }
  return total / static_cast<double>(n);
}

double psnr(const Tensor& x, const Tensor& y, double data_range) {
  require_same_shape(x, y, "psnr");
  const auto a = x.data();
  const auto b = y.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(data_range * data_range / mse));
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    taps[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

struct Gray {
  int height = 0, width = 0;
  std::vector<double> v;
};

Gray to_gray(const Tensor& t) {
  Shape s = t.shape();
  if (s.size() == 4 && s[0] == 1) s.erase(s.begin());
  if (s.size() != 3) throw ShapeError("ssim expects one [C,H,W] image, got " + to_string(t.shape()));
  Gray g{s[1], s[2], std::vector<double>(static_cast<std::size_t>(s[1]) * s[2], 0.0)};
  const std::size_t plane = g.v.size();
  const auto d = t.data();
  for (int c = 0; c < s[0]; ++c) {
    for (std::size_t p = 0; p < plane; ++p) g.v[p] += d[c * plane + p];
  }
  for (double& v : g.v) v /= s[0];
  return g;
}

// Valid-mode separable Gaussian filter.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w, const std::array<double, kWindow>& taps) {
  const int oh = h - kWindow + 1;
  const int ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[k] * img[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Tensor& x, const Tensor& y, double data_range) {
  require_same_shape(x, y, "ssim");
  const Gray a = to_gray(x);
  const Gray b = to_gray(y);
  if (a.height < kWindow || a.width < kWindow) {
    throw ShapeError("ssim: image " + to_string(x.shape()) + " smaller than the 11x11 window");
  }
  const auto taps = gaussian_taps();
  std::vector<double> aa(a.v.size()), bb(a.v.size()), ab(a.v.size());
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    aa[i] = a.v[i] * a.v[i];
    bb[i] = b.v[i] * b.v[i];
    ab[i] = a.v[i] * b.v[i];
  }
  const auto mu_a = filter_valid(a.v, a.height, a.width, taps);
  const auto mu_b = filter_valid(b.v, a.height, a.width, taps);
  const auto e_aa = filter_valid(aa, a.height, a.width, taps);
  const auto e_bb = filter_valid(bb, a.height, a.width, taps);
  const auto e_ab = filter_valid(ab, a.height, a.width, taps);
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    total += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

nlohmann::json to_json(const MetricReport& r) {
  return {{"arch", r.arch},   {"variance", r.latent_variance}, {"psnr_db", r.psnr_db},
          {"ssim", r.ssim},   {"n", r.num_eval_images},        {"config_hash", r.config_hash}};
}

MetricReport report_from_json(const nlohmann::json& j) {
  if (const auto err = validate_report_json(j); !err.empty()) throw std::invalid_argument("invalid report: " + err);
  return {j.at("arch").get<std::string>(), j.at("variance").get<double>(), j.at("psnr_db").get<double>(),
          j.at("ssim").get<double>(),      j.at("n").get<int>(),           j.at("config_hash").get<std::string>()};
}

std::string validate_report_json(const nlohmann::json& j) {
  if (!j.is_object()) return "report is not an object";
  const std::set<std::string> expected{"arch", "variance", "psnr_db", "ssim", "n", "config_hash"};
  std::set<std::string> keys;
  for (const auto& [k, _] : j.items()) keys.insert(k);
  if (keys != expected) return "report keys must be exactly arch, variance, psnr_db, ssim, n, config_hash";
  if (!j["arch"].is_string() || (j["arch"] != "baseline" && j["arch"] != "expdwt")) return "arch must be baseline|expdwt";
  for (const char* k : {"variance", "psnr_db", "ssim"}) {
    if (!j[k].is_number()) return std::string(k) + " must be a number";
  }
  if (!j["n"].is_number_integer() || j["n"].get<long>() < 0) return "n must be a non-negative integer";
  if (!j["config_hash"].is_string() || j["config_hash"].get<std::string>().empty()) return "config_hash must be a string";
  if (j["variance"].get<double>() < 0.0) return "variance must be non-negative";
  const double s = j["ssim"].get<double>();
  if (s < -1.0 || s > 1.0) return "ssim must lie in [-1, 1]";
  if (j["psnr_db"].get<double>() <= 0.0) return "psnr_db must be positive";
  return {};
}

}  // namespace wavelatent
