#include "wavelatent/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>

namespace wavelatent {

namespace {

// Independent double-precision forward pass used as the finite-difference
// oracle. It reads the float parameters but shares no code with the tape ops,
// so float rounding in the model does not swamp the central differences.
struct Field {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Field() = default;
  Field(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}
  double& at(int ch, int y, int x) { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
  double at(int ch, int y, int x) const { return v[(static_cast<std::size_t>(ch) * h + y) * w + x]; }
};

class ReferenceNet {
 public:
  explicit ReferenceNet(const VaeModel& model) : model_(model), cfg_(model.config()) {
    for (auto& p : model.parameters()) params_.emplace(p.name, p.tensor);
  }

  // Returns (per-sample recon sum, per-sample KL sum) for image n of x.
  std::pair<double, double> sample_terms(const Tensor& x, const Tensor& noise, int n, ReconLoss recon) const {
    Field img = slice(x, n);
    Field m = encoder("encoder", img);
    if (model_.architecture() == Architecture::kExpDwt) {
      const bool shared = cfg_.frequency_branch_weights == BranchWeights::kShared;
      std::array<Field, 4> bands = dwt(img);
      const char* names[4] = {"ll", "lh", "hl", "hh"};
      for (int k = 0; k < 4; ++k) bands[k] = encoder(shared ? "encoder" : std::string("frequency.") + names[k], bands[k]);
      const Field m_s = idwt(bands);
      for (std::size_t i = 0; i < m.v.size(); ++i) m.v[i] += m_s.v[i];
    }
    const Field q = conv("posterior.q", m, 1);
    const int lc = cfg_.latent_channels;
    const Field eps = slice(noise, n);
    Field z(lc, q.h, q.w);
    double kl = 0.0;
    for (int ch = 0; ch < lc; ++ch)
      for (int y = 0; y < q.h; ++y)
        for (int xx = 0; xx < q.w; ++xx) {
          const double mu = q.at(ch, y, xx);
          const double lv = std::clamp(q.at(lc + ch, y, xx), static_cast<double>(GaussianPosterior::kMinLogVar),
                                       static_cast<double>(GaussianPosterior::kMaxLogVar));
          z.at(ch, y, xx) = mu + std::exp(0.5 * lv) * eps.at(ch, y, xx);
          kl += 0.5 * (mu * mu + std::exp(lv) - 1.0 - lv);
        }
    const Field out = decoder(z);
    double rec = 0.0;
    for (std::size_t i = 0; i < out.v.size(); ++i) {
      const double d = out.v[i] - img.v[i];
      rec += recon == ReconLoss::kL1 ? std::fabs(d) : d * d;
    }
    return {rec, kl};
  }

 private:
  static Field slice(const Tensor& t, int n) {
    Field f(t.dim(1), t.dim(2), t.dim(3));
    const auto d = t.data().subspan(static_cast<std::size_t>(n) * f.v.size(), f.v.size());
    std::copy(d.begin(), d.end(), f.v.begin());
    return f;
  }

  double act(double v) const { return cfg_.activation == Activation::kSilu ? v / (1.0 + std::exp(-v)) : std::max(v, 0.0); }

  Field conv(const std::string& layer, const Field& x, int stride) const {
    const Tensor& wt = params_.at(layer + ".weight");
    const Tensor& bt = params_.at(layer + ".bias");
    const auto w = wt.data();
    const auto b = bt.data();
    const int oc = wt.dim(0), k = wt.dim(2), pad = k / 2;
    Field y(oc, (x.h + 2 * pad - k) / stride + 1, (x.w + 2 * pad - k) / stride + 1);
    for (int o = 0; o < oc; ++o)
      for (int oy = 0; oy < y.h; ++oy)
        for (int ox = 0; ox < y.w; ++ox) {
          double acc = b[o];
          for (int ic = 0; ic < x.c; ++ic)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                acc += static_cast<double>(w[((static_cast<std::size_t>(o) * x.c + ic) * k + ky) * k + kx]) * x.at(ic, iy, ix);
              }
          y.at(o, oy, ox) = acc;
        }
    return y;
  }

  Field encoder(const std::string& prefix, Field h) const {
    for (int s = 0; s < cfg_.num_downsamples; ++s) {
      const std::string stage = prefix + ".stage" + std::to_string(s);
      h = activated(conv(stage + ".conv", h, 1));
      h = activated(conv(stage + ".down", h, 2));
    }
    return conv(prefix + ".out", h, 1);
  }

  Field decoder(const Field& z) const {
    Field h = activated(conv("decoder.in", z, 1));
    for (int s = cfg_.num_downsamples - 1; s >= 0; --s) {
      Field up(h.c, 2 * h.h, 2 * h.w);
      for (int ch = 0; ch < h.c; ++ch)
        for (int y = 0; y < up.h; ++y)
          for (int x = 0; x < up.w; ++x) up.at(ch, y, x) = h.at(ch, y / 2, x / 2);
      const std::string stage = "decoder.stage" + std::to_string(s);
      h = activated(conv(stage + ".conv", up, 1));
      h = activated(conv(stage + ".refine", h, 1));
    }
    Field out = conv("decoder.out", h, 1);
    for (double& v : out.v) v = std::tanh(v);
    return out;
  }

  Field activated(Field f) const {
    for (double& v : f.v) v = act(v);
    return f;
  }

  // Haar on 2x2 blocks of even-sized fields, bands ordered LL, LH, HL, HH.
  static std::array<Field, 4> dwt(const Field& x) {
    std::array<Field, 4> b;
    for (auto& f : b) f = Field(x.c, x.h / 2, x.w / 2);
    for (int ch = 0; ch < x.c; ++ch)
      for (int y = 0; y < x.h / 2; ++y)
        for (int xx = 0; xx < x.w / 2; ++xx) {
          const double a = x.at(ch, 2 * y, 2 * xx), bb = x.at(ch, 2 * y, 2 * xx + 1);
          const double c = x.at(ch, 2 * y + 1, 2 * xx), d = x.at(ch, 2 * y + 1, 2 * xx + 1);
          b[0].at(ch, y, xx) = (a + bb + c + d) / 2;
          b[1].at(ch, y, xx) = (a + bb - c - d) / 2;
          b[2].at(ch, y, xx) = (a - bb + c - d) / 2;
          b[3].at(ch, y, xx) = (a - bb - c + d) / 2;
        }
    return b;
  }

  static Field idwt(const std::array<Field, 4>& b) {
    const Field& ll = b[0];
    Field x(ll.c, 2 * ll.h, 2 * ll.w);
    for (int ch = 0; ch < ll.c; ++ch)
      for (int y = 0; y < ll.h; ++y)
        for (int xx = 0; xx < ll.w; ++xx) {
          const double s = ll.at(ch, y, xx), lh = b[1].at(ch, y, xx), hl = b[2].at(ch, y, xx), hh = b[3].at(ch, y, xx);
          x.at(ch, 2 * y, 2 * xx) = (s + lh + hl + hh) / 2;
          x.at(ch, 2 * y, 2 * xx + 1) = (s + lh - hl - hh) / 2;
          x.at(ch, 2 * y + 1, 2 * xx) = (s - lh + hl - hh) / 2;
          x.at(ch, 2 * y + 1, 2 * xx + 1) = (s - lh - hl + hh) / 2;
        }
    return x;
  }

  const VaeModel& model_;
  EncoderConfig cfg_;
  std::map<std::string, Tensor> params_;
};

}  // namespace

double reference_loss(const VaeModel& model, const Tensor& x, const Tensor& noise, double kl_weight, ReconLoss recon) {
  const ReferenceNet net(model);
  const int batch = x.dim(0);
  double rec = 0.0, kl = 0.0;
  for (int n = 0; n < batch; ++n) {
    const auto [r, k] = net.sample_terms(x, noise, n, recon);
    rec += r;
    kl += k;
  }
  rec /= static_cast<double>(x.numel());
  kl /= batch;
  return rec + kl_weight * kl;
}

void randomize_for_gradcheck(VaeModel& model, Rng& rng) {
  for (auto& p : model.parameters()) {
    auto w = p.tensor.mutable_data();
    const bool bias = p.name.ends_with(".bias");
    const bool posterior = p.name.starts_with("posterior.");
    double scale = 0.1;
    if (!bias) {
      const auto& s = p.tensor.shape();
      scale = std::sqrt(2.0 / (s[1] * s[2] * s[3])) * (posterior ? 0.5 : 1.0);
    }
    for (float& v : w) v = static_cast<float>(scale * rng.normal());
  }
}

namespace {

// Central differences of `loss` w.r.t. every element of `target`, compared with
// `analytic`. The actual float step is used as the divisor.
TensorCheck compare(std::string arch, std::string name, std::string module, Tensor target,
                    const std::vector<float>& analytic, double eps, const std::function<double()>& loss) {
  TensorCheck c{std::move(arch), std::move(name), std::move(module), target.numel(), 0.0, 0.0};
  auto values = target.mutable_data();
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float orig = values[i];
    const float up = static_cast<float>(orig + eps);
    const float down = static_cast<float>(orig - eps);
    values[i] = up;
    const double lp = loss();
    values[i] = down;
    const double lm = loss();
    values[i] = orig;
    const double numeric = (lp - lm) / (static_cast<double>(up) - static_cast<double>(down));
    const double d = analytic[i] - numeric;
    diff2 += d * d;
    a2 += static_cast<double>(analytic[i]) * analytic[i];
    n2 += numeric * numeric;
    c.max_abs_error = std::max(c.max_abs_error, std::fabs(d));
  }
  const double denom = std::sqrt(std::max(a2, n2));
  c.rel_error = denom > 1e-12 ? std::sqrt(diff2) / denom : std::sqrt(diff2);
  return c;
}

void check_model(Architecture arch, const GradcheckOptions& o, GradcheckReport& report) {
  EncoderConfig cfg;
  cfg.input_size = o.input_size;
  cfg.base_channels = o.base_channels;
  cfg.num_downsamples = o.num_downsamples;
  cfg.latent_channels = o.latent_channels;
  cfg.activation = o.activation;
  Rng init = Rng::stream(o.seed, "init");
  VaeModel model(cfg, arch, init);
  Rng draw = Rng::stream(o.seed, "gradcheck");
  randomize_for_gradcheck(model, draw);

  std::vector<float> xs(static_cast<std::size_t>(cfg.in_channels) * cfg.input_size * cfg.input_size);
  for (float& v : xs) v = static_cast<float>(draw.uniform(-1.0, 1.0));
  const bool input_grad = arch == Architecture::kExpDwt;
  Tensor x = Tensor::from({1, cfg.in_channels, cfg.input_size, cfg.input_size}, xs, input_grad);
  const Tensor noise = draw.normal_tensor(model.latent_shape(1));

  Tape tape;
  const ForwardResult fwd = model.forward(tape, x, noise);
  LossTerms terms = vae_loss(tape, x, fwd, static_cast<float>(o.kl_weight), o.recon);
  tape.backward(terms.total);

  const std::string arch_name(architecture_name(arch));
  const Tensor x_const = Tensor::from(x.shape(), xs);
  auto loss = [&] { return reference_loss(model, input_grad ? x : x_const, noise, o.kl_weight, o.recon); };
  for (auto& p : model.parameters()) {
    const std::string module = p.name.starts_with("posterior.") ? "posterior" : "conv";
    const std::vector<float> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
    report.checks.push_back(compare(arch_name, p.name, module, p.tensor, analytic, o.epsilon, loss));
  }
  if (input_grad) {
    // The target is also perturbed, so this covers both loss operands and the
    // dwt2 path from the image into the frequency branch.
    const std::vector<float> analytic(x.grad().begin(), x.grad().end());
    report.checks.push_back(compare(arch_name, "input", "dwt", x, analytic, o.epsilon, loss));
  }
}

void check_wavelet_chain(const GradcheckOptions& o, const Shape& shape, GradcheckReport& report) {
  Rng rng = Rng::stream(o.seed, "gradcheck-dwt", static_cast<std::uint64_t>(shape[2] * 1000 + shape[3]));
  Tensor x = rng.normal_tensor(shape).clone(true);
  const Tensor probe = rng.normal_tensor(shape);
  const SubBandSet layout = [&] {
    Tape t(Tape::Mode::kInference);
    return dwt2(t, x);
  }();
  std::array<Tensor, 4> band_weights;
  for (auto& w : band_weights) w = rng.normal_tensor(layout.ll.shape());

  auto forward = [&](Tape& tape) {
    SubBandSet b = dwt2(tape, x);
    b.ll = ops::mul(tape, b.ll, band_weights[0]);
    b.lh = ops::mul(tape, b.lh, band_weights[1]);
    b.hl = ops::mul(tape, b.hl, band_weights[2]);
    b.hh = ops::mul(tape, b.hh, band_weights[3]);
    return ops::mul(tape, idwt2(tape, b), probe);
  };
  Tape tape;
  Tensor s = ops::sum(tape, forward(tape));
  tape.backward(s);
  const std::vector<float> analytic(x.grad().begin(), x.grad().end());
  auto loss = [&] {
    Tape t(Tape::Mode::kInference);
    const Tensor y = forward(t);
    double acc = 0.0;
    for (float v : y.data()) acc += v;
    return acc;
  };
  report.checks.push_back(compare("-", "dwt2/idwt2 " + to_string(shape), "dwt", x, analytic, o.epsilon, loss));
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (options.input_size > 16) throw ConfigError("gradcheck is limited to inputs of at most 16x16");
  GradcheckReport report;
  check_model(Architecture::kBaseline, options, report);
  check_model(Architecture::kExpDwt, options, report);
  check_wavelet_chain(options, {1, 2, 6, 8}, report);
  check_wavelet_chain(options, {1, 2, 5, 7}, report);

  report.worst_by_module = {{"conv", 0.0}, {"dwt", 0.0}, {"posterior", 0.0}};
  for (const auto& c : report.checks) {
    auto& w = report.worst_by_module[c.module];
    w = std::max(w, c.rel_error);
    if (c.rel_error >= report.worst_error) {
      report.worst_error = c.rel_error;
      report.worst_name = c.arch + ":" + c.name;
    }
  }
  report.passed = report.worst_error <= options.tolerance;
  return report;
}

}  // namespace wavelatent
