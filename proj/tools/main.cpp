#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>

#include <CLI11.hpp>

#include "commands.hpp"
#include "wavelatent/container.hpp"
#include "wavelatent/dataset.hpp"
#include "wavelatent/image_io.hpp"
#include "wavelatent/losses.hpp"
#include "wavelatent/model.hpp"

using namespace wavelatent;

namespace {

void add_config_flags(CLI::App* sub, cli::ConfigArgs& args) {
  sub->add_option("--config", args.config_path, "JSON run config (defaults when omitted)");
  sub->add_option("--set", args.overrides, "KEY=VALUE override, repeatable; later wins")->take_all();
  sub->add_option("--seed", args.seed, "Override the config seed");
}

int run_guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: numerical abort (%s): %s\n", e.term().c_str(), e.what());
    return cli::kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return cli::kUsage;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wavelet-augmented VAE trainer and inspection tools"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  cli::ConfigArgs cfg;
  std::string out;
  std::string checkpoint;
  std::string image;
  std::string format = "ppm";
  cli::GradcheckArgs grad;
  std::function<int()> action;

  auto* train = app.add_subcommand("train", "Train one model; writes config.json, curves.csv, checkpoint.bin, report.json");
  add_config_flags(train, cfg);
  train->add_option("--out", out, "Run directory")->required();
  train->callback([&] { action = [&] { return cli::cmd_train(cfg, out); }; });

  auto* compare = app.add_subcommand("compare", "Train baseline and expdwt under one config and tabulate");
  add_config_flags(compare, cfg);
  compare->add_option("--out", out, "Output directory")->required();
  compare->callback([&] { action = [&] { return cli::cmd_compare(cfg, out); }; });

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the config's validation split");
  add_config_flags(eval, cfg);
  eval->add_option("--checkpoint", checkpoint, "checkpoint.bin")->required();
  eval->add_option("--out", out, "Directory for config.json and report.json");
  eval->callback([&] { action = [&] { return cli::cmd_eval(cfg, checkpoint, out); }; });

  auto* recon = app.add_subcommand("reconstruct", "Reconstruct one image and print PSNR/SSIM");
  recon->add_option("--checkpoint", checkpoint, "checkpoint.bin")->required();
  recon->add_option("--image", image, "Input PNG/PPM")->required();
  recon->add_option("--out", out, "Output image path (.png/.ppm)")->required();
  recon->callback([&] { action = [&] { return cli::cmd_reconstruct(checkpoint, image, out); }; });

  auto* dwt = app.add_subcommand("dwt", "Write the four Haar sub-bands of an image plus energy stats");
  dwt->add_option("--image", image, "Input PNG/PPM")->required();
  dwt->add_option("--out", out, "Output directory")->required();
  dwt->callback([&] { action = [&] { return cli::cmd_dwt(image, out); }; });

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient (both architectures)");
  add_config_flags(gradcheck, grad.config);
  gradcheck->add_option("--out", grad.out_dir, "Directory for gradcheck.json");
  gradcheck->add_option("--inject-fault", grad.fault_op)->group("");
  gradcheck->add_option("--fault-scale", grad.fault_scale)->group("");
  gradcheck->callback([&] {
    if (!grad.fault_op.empty() && grad.fault_scale == 1.0f) grad.fault_scale = 1.5f;
    action = [&] { return cli::cmd_gradcheck(grad); };
  });

  auto* synth = app.add_subcommand("synth", "Generate synthetic tiles");
  add_config_flags(synth, cfg);
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--format", format, "ppm, png or cache")->check(CLI::IsMember({"ppm", "png", "cache"}));
  synth->callback([&] { action = [&] { return cli::cmd_synth(cfg, out, format); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kUsage;
  }
  return run_guarded(action);
}
