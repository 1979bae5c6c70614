#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>

#include <json.hpp>

#include "wavelatent/checkpoint.hpp"
#include "wavelatent/config.hpp"
#include "wavelatent/dataset.hpp"
#include "wavelatent/experiment.hpp"
#include "wavelatent/gradcheck.hpp"
#include "wavelatent/image_io.hpp"
#include "wavelatent/metrics.hpp"
#include "wavelatent/ops.hpp"
#include "wavelatent/synth.hpp"
#include "wavelatent/trainer.hpp"
#include "wavelatent/wavelet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace wavelatent::cli {
namespace {

RunConfig resolve(const ConfigArgs& args) {
  RunConfig cfg = load_run_config(args.config_path, args.overrides);
  if (args.seed) cfg.seed = *args.seed;
  cfg.validate();
  return cfg;
}

void print_row(const CurveRow& row, int interval) {
  if (row.split == Split::kVal) {
    std::fprintf(stderr, "step %6d  val   total %.6f  recon %.6f  kl %.4f\n", row.step, row.loss.total,
                 row.loss.recon, row.loss.kl);
  } else if (row.step % interval == 0) {
    std::fprintf(stderr, "step %6d  train total %.6f  recon %.6f  kl %.4f\n", row.step, row.loss.total,
                 row.loss.recon, row.loss.kl);
  }
}

void print_report(const MetricReport& r) {
  std::printf("%s: variance %.6f  psnr %.4f dB  ssim %.6f  (n=%d)\n", r.arch.c_str(), r.latent_variance, r.psnr_db,
              r.ssim, r.num_eval_images);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Tensor image_tensor(const ImageU8& img) {
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  std::vector<float> chw(plane * img.channels);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < img.channels; ++c) chw[c * plane + p] = normalize_byte(img.pixels[p * img.channels + c]);
  }
  return Tensor::from({1, img.channels, img.height, img.width}, std::move(chw));
}

// Affine map of the band's value range onto [-1, 1]; a flat band maps to 0.
ImageU8 band_image(const Tensor& band) {
  const auto v = band.data();
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const float span = *hi - *lo;
  std::vector<float> scaled(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) scaled[i] = span > 0.0f ? 2.0f * (v[i] - *lo) / span - 1.0f : 0.0f;
  return image_from_chw(scaled, band.dim(2), band.dim(3));
}

}  // namespace

int cmd_train(const ConfigArgs& args, const std::string& out_dir) {
  const RunConfig cfg = resolve(args);
  const fs::path out(out_dir);
  write_run_config(out, cfg);
  const Dataset data = load_dataset(cfg.data, cfg.seed);
  std::fprintf(stderr, "training %s on %zu tiles for %d steps\n", std::string(architecture_name(cfg.arch)).c_str(),
               data.size(), cfg.train.steps);
  const TrainingRun run =
      run_training(cfg, data, [&](const CurveRow& r) { print_row(r, cfg.train.eval_interval); });
  write_run_outputs(out, run);
  print_report(run.report);
  return kOk;
}

int cmd_compare(const ConfigArgs& args, const std::string& out_dir) {
  RunConfig base = resolve(args);
  base.arch = Architecture::kBaseline;
  RunConfig exp = base;
  exp.arch = Architecture::kExpDwt;
  const fs::path out(out_dir);
  write_run_config(out / "baseline", base);
  write_run_config(out / "expdwt", exp);
  const Dataset data = load_dataset(base.data, base.seed);
  auto progress = [&](const CurveRow& r) { print_row(r, base.train.eval_interval); };
  const ExperimentResult result = run_experiment(base, exp, data, progress);
  write_run_outputs(out / "baseline", result.baseline);
  write_run_outputs(out / "expdwt", result.expdwt);

  const std::string table = comparison_table(result.baseline.report, result.expdwt.report);
  write_text(out / "table.txt", table);
  write_text(out / "val_curves.csv", aligned_validation_curves(result.baseline, result.expdwt));
  const double vb = result.baseline.report.latent_variance;
  const double ve = result.expdwt.report.latent_variance;
  json manifest = {
      {"seed", base.seed},
      {"config_hash", protocol_hash(base)},
      {"runs", {{"baseline", "baseline"}, {"expdwt", "expdwt"}}},
      {"table", "table.txt"},
      {"val_curves", "val_curves.csv"},
      {"variance", {{"baseline", vb}, {"expdwt", ve}, {"expdwt_exceeds_baseline", ve > vb}}},
      {"created_utc", utc_timestamp()},
  };
  write_text(out / "compare.json", manifest.dump(2) + "\n");
  std::fputs(table.c_str(), stdout);
  std::printf("latent variance: expdwt %s baseline\n", ve > vb ? "exceeds" : "does not exceed");
  return kOk;
}

int cmd_eval(const ConfigArgs& args, const std::string& checkpoint, const std::string& out_dir) {
  ConfigArgs a = args;
  if (a.config_path.empty()) {
    const fs::path sibling = fs::path(checkpoint).parent_path() / "config.json";
    if (fs::exists(sibling)) a.config_path = sibling.string();
  }
  const RunConfig cfg = resolve(a);
  if (!out_dir.empty()) write_run_config(out_dir, cfg);
  const VaeModel model = load_checkpoint(checkpoint);
  if (!(model.config() == cfg.model) || model.architecture() != cfg.arch) {
    throw ConfigError("checkpoint " + checkpoint + " does not match the config's model/arch");
  }
  Dataset data = load_dataset(cfg.data, cfg.seed);
  assign_splits(data, cfg.seed, cfg.train.val_fraction);
  auto idx = data.indices(Split::kVal);
  if (idx.empty()) idx = data.indices(Split::kTrain);
  const Evaluation ev = evaluate(model, data, idx, cfg);
  if (!out_dir.empty()) write_text(fs::path(out_dir) / "report.json", to_json(ev.report).dump(2) + "\n");
  std::printf("val total %.6f  recon %.6f  kl %.6f\n", ev.loss.total, ev.loss.recon, ev.loss.kl);
  print_report(ev.report);
  return kOk;
}

int cmd_reconstruct(const std::string& checkpoint, const std::string& image, const std::string& out_path) {
  const VaeModel model = load_checkpoint(checkpoint);
  const ImageU8 img = read_image(image);
  if (img.channels != 3) throw ImageError(image + ": expected an RGB image");
  const int size = model.config().input_size;
  if (img.width != size || img.height != size) {
    throw ConfigError(image + " is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                      ", checkpoint expects " + std::to_string(size) + "x" + std::to_string(size));
  }
  const Tensor x = image_tensor(img);
  Tape tape(Tape::Mode::kInference);
  // Zero noise decodes the posterior mean, so the output is deterministic.
  const ForwardResult fwd = model.forward(tape, x, Tensor::zeros(model.latent_shape(1)));
  const Tensor& y = fwd.reconstruction;
  const ImageU8 out = image_from_chw(y.data(), size, size);
  if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
  write_image(out_path, out);
  std::printf("psnr_db %.6f\nssim %.6f\n", psnr(x, y, 2.0), ssim(x, y, 2.0));
  return kOk;
}

int cmd_dwt(const std::string& image, const std::string& out_dir) {
  const ImageU8 img = read_image(image);
  const Tensor x = image_tensor(img);
  Tape tape(Tape::Mode::kInference);
  const SubBandSet bands = dwt2(tape, x);
  const Tensor back = idwt2(tape, bands);
  double err = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    err = std::max(err, std::fabs(static_cast<double>(back.data()[i]) - x.data()[i]));
  }
  const auto energy = band_energy_fractions(bands);

  const fs::path out(out_dir);
  fs::create_directories(out);
  const char* names[4] = {"LL", "LH", "HL", "HH"};
  const auto list = bands.bands();
  json j = {{"image", fs::path(image).filename().string()},
            {"height", img.height},
            {"width", img.width},
            {"channels", img.channels},
            {"roundtrip_max_error", err}};
  for (int k = 0; k < 4; ++k) {
    write_image(out / (std::string(names[k]) + ".png"), band_image(*list[k]));
    j["energy"][names[k]] = energy[k];
  }
  write_text(out / "dwt.json", j.dump(2) + "\n");
  std::printf("energy LL %.6f LH %.6f HL %.6f HH %.6f  roundtrip max error %.3g\n", energy[0], energy[1],
              energy[2], energy[3], err);
  return kOk;
}

int cmd_gradcheck(const GradcheckArgs& args) {
  GradcheckOptions opt;
  const bool configured = !args.config.config_path.empty() || !args.config.overrides.empty();
  if (configured) {
    // Only the model section and the reconstruction loss matter here; the
    // data section is not touched.
    RunConfig cfg = load_run_config(args.config.config_path, args.config.overrides);
    cfg.model.validate();
    if (cfg.model.input_size > 16) {
      throw ConfigError("gradcheck needs model.input_size <= 16, got " + std::to_string(cfg.model.input_size));
    }
    opt.input_size = cfg.model.input_size;
    opt.base_channels = cfg.model.base_channels;
    opt.num_downsamples = cfg.model.num_downsamples;
    opt.latent_channels = cfg.model.latent_channels;
    opt.activation = cfg.model.activation;
    opt.recon = cfg.train.recon;
    opt.seed = cfg.seed;
    if (!args.out_dir.empty()) write_run_config(args.out_dir, cfg);
  }
  if (args.config.seed) opt.seed = *args.config.seed;
  if (!args.fault_op.empty()) testing::inject_backward_fault(args.fault_op, args.fault_scale);

  const GradcheckReport report = run_gradcheck(opt);
  testing::clear_backward_faults();

  for (const auto& c : report.checks) {
    std::printf("%-9s %-28s %-9s n=%-5zu rel %.3e  max abs %.3e\n", c.arch.c_str(), c.name.c_str(),
                c.module.c_str(), c.count, c.rel_error, c.max_abs_error);
  }
  for (const auto& [module, err] : report.worst_by_module) std::printf("worst %-9s %.3e\n", module.c_str(), err);
  std::printf("worst relative error %.3e at %s (tolerance %.0e)\n", report.worst_error, report.worst_name.c_str(),
              opt.tolerance);
  if (!args.out_dir.empty()) {
    json j = {{"passed", report.passed},
              {"worst_error", report.worst_error},
              {"worst_parameter", report.worst_name},
              {"worst_by_module", report.worst_by_module}};
    for (const auto& c : report.checks) {
      j["checks"].push_back({{"arch", c.arch}, {"name", c.name}, {"module", c.module}, {"rel_error", c.rel_error}});
    }
    fs::create_directories(args.out_dir);
    write_text(fs::path(args.out_dir) / "gradcheck.json", j.dump(2) + "\n");
  }
  if (!report.passed) {
    std::fprintf(stderr, "gradcheck FAILED: parameter %s exceeds tolerance\n", report.worst_name.c_str());
    return kVerification;
  }
  std::printf("gradcheck passed\n");
  return kOk;
}

int cmd_synth(const ConfigArgs& args, const std::string& out_dir, const std::string& format) {
  RunConfig cfg = load_run_config(args.config_path, args.overrides);
  if (args.seed) cfg.seed = *args.seed;
  cfg.data.source = "synth";
  cfg.data.validate();
  const fs::path out(out_dir);
  write_run_config(out, cfg);
  const Dataset data = synth_tiles(cfg.data.count, cfg.data.size, cfg.seed);
  if (format == "cache") {
    save_dataset_cache(out / "tiles.xdat", data);
  } else {
    for (const auto& t : data.tiles) {
      write_image(out / (t.source_id + "." + format), image_from_chw(t.pixels, t.height, t.width));
    }
  }
  std::printf("wrote %zu tiles (%dx%d, recipe v%d) to %s\n", data.size(), cfg.data.size, cfg.data.size,
              kSynthVersion, out_dir.c_str());
  return kOk;
}

}  // namespace wavelatent::cli
