#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "helpers.hpp"
#include "wavelatent/checkpoint.hpp"
#include "wavelatent/dataset.hpp"
#include "wavelatent/image_io.hpp"
#include "wavelatent/metrics.hpp"

using namespace wavelatent;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

const std::string kCli = WAVELATENT_CLI_PATH;
// Small, fast training setup shared by the CLI cases.
const std::string kTiny =
    " --set model.input_size=16 --set data.size=16 --set model.base_channels=4 --set model.num_downsamples=1"
    " --set data.count=24 --set batch_size=4 --set eval_interval=5";

struct Result {
  int code;
  std::string out;
};

Result cli(const std::string& args, const TempDir& dir) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = "cd " + dir.path.string() + " && " + kCli + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("train writes the run directory") {
    TempDir dir("cli_train");
    const Result r = cli("train --out run --set steps=10" + kTiny, dir);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    for (const char* f : {"config.json", "curves.csv", "checkpoint.bin", "report.json"}) {
      CHECK_MESSAGE(fs::exists(dir / "run" / f), f);
    }
    CHECK(read_json(dir / "run/config.json")["train"]["steps"] == 10);
    CHECK(validate_report_json(read_json(dir / "run/report.json")).empty());
    const std::string curves = slurp(dir / "run/curves.csv");
    CHECK(curves.rfind("step,total,recon,kl,split\n", 0) == 0);
    CHECK(std::count(curves.begin(), curves.end(), '\n') == 1 + 10 + 3);

    // A config file plus overrides; --seed beats the file.
    std::ofstream(dir / "cfg.json") << R"({"seed": 9, "train": {"steps": 4}})";
    const Result r2 = cli("train --config cfg.json --seed 2 --out run2" + kTiny, dir);
    REQUIRE_MESSAGE(r2.code == 0, r2.out);
    const auto cfg = read_json(dir / "run2/config.json");
    CHECK(cfg["seed"] == 2);
    CHECK(cfg["train"]["steps"] == 4);
  }

  TEST_CASE("usage and config errors exit 1") {
    TempDir dir("cli_err");
    Result r = cli("train --config does_not_exist.json --out x", dir);
    CHECK(r.code == 1);
    CHECK(r.out.find("does_not_exist.json") != std::string::npos);
    CHECK(cli("train --out x --set bogus=1", dir).code == 1);
    CHECK(cli("train --out x --set model.input_size=48", dir).code == 1);
    CHECK(cli("frobnicate", dir).code == 1);
    CHECK(cli("", dir).code == 1);
    CHECK(cli("dwt --image missing.png --out d", dir).code == 1);
    CHECK(cli("--help", dir).code == 0);
  }

  TEST_CASE("reports of the two architectures differ only in model-dependent fields") {
    TempDir dir("cli_arch");
    REQUIRE(cli("train --out b --set arch=baseline --set steps=6" + kTiny, dir).code == 0);
    REQUIRE(cli("train --out e --set arch=expdwt --set steps=6" + kTiny, dir).code == 0);
    auto b = read_json(dir / "b/report.json");
    auto e = read_json(dir / "e/report.json");
    CHECK(b["arch"] == "baseline");
    CHECK(e["arch"] == "expdwt");
    CHECK(b["n"] == e["n"]);
    CHECK(b["config_hash"] == e["config_hash"]);
    auto cb = read_json(dir / "b/config.json");
    auto ce = read_json(dir / "e/config.json");
    cb.erase("arch");
    ce.erase("arch");
    CHECK(cb == ce);
  }

  TEST_CASE("dwt on a constant image") {
    TempDir dir("cli_dwt");
    write_image(dir / "gray.png", ImageU8{16, 12, 3, std::vector<std::uint8_t>(16 * 12 * 3, 128)});
    const Result r = cli("dwt --image gray.png --out bands", dir);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    const auto j = read_json(dir / "bands/dwt.json");
    double total = 0.0;
    for (const char* b : {"LL", "LH", "HL", "HH"}) total += j["energy"][b].get<double>();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(j["energy"]["HH"].get<double>() <= 1e-12);
    CHECK(j["roundtrip_max_error"].get<double>() <= 1e-6);
    const ImageU8 ll = read_image(dir / "bands/LL.png");
    CHECK(ll.width == 8);
    CHECK(ll.height == 6);
    const std::string first = slurp(dir / "bands/LH.png") + slurp(dir / "bands/dwt.json");
    REQUIRE(cli("dwt --image gray.png --out bands", dir).code == 0);
    CHECK(slurp(dir / "bands/LH.png") + slurp(dir / "bands/dwt.json") == first);
  }

  TEST_CASE("dwt energies on a textured image sum to one") {
    TempDir dir("cli_dwt2");
    REQUIRE(cli("synth --out tiles --set data.count=1 --set data.size=32", dir).code == 0);
    REQUIRE(cli("dwt --image tiles/synth_000000.ppm --out bands", dir).code == 0);
    const auto j = read_json(dir / "bands/dwt.json");
    double total = 0.0;
    for (const char* b : {"LL", "LH", "HL", "HH"}) {
      total += j["energy"][b].get<double>();
      CHECK(j["energy"][b].get<double>() > 0.0);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
  }

  TEST_CASE("reconstruct: dimensions, printed metrics and trained-vs-untrained ordering") {
    TempDir dir("cli_recon");
    const std::string tiny = kTiny + " --set learning_rate=0.003 --set latent_channels=8";
    REQUIRE(cli("train --out untrained --set steps=0" + tiny, dir).code == 0);
    REQUIRE(cli("train --out trained --set steps=150" + tiny, dir).code == 0);
    REQUIRE(cli("synth --out tiles --set data.count=2 --set data.size=16", dir).code == 0);

    auto run = [&](const std::string& ckpt) {
      const Result r = cli("reconstruct --checkpoint " + ckpt + " --image tiles/synth_000001.ppm --out rec.png", dir);
      REQUIRE_MESSAGE(r.code == 0, r.out);
      double p = 0.0, s = 0.0;
      std::sscanf(r.out.c_str(), "psnr_db %lf\nssim %lf", &p, &s);
      return std::pair{p, s};
    };
    const auto [p_untrained, s_untrained] = run("untrained/checkpoint.bin");
    const auto [p_trained, s_trained] = run("trained/checkpoint.bin");
    CHECK(p_trained > p_untrained);

    const ImageU8 out = read_image(dir / "rec.png");
    CHECK(out.width == 16);
    CHECK(out.height == 16);

    // Same pair through the metrics module.
    const VaeModel m = load_checkpoint(dir / "trained/checkpoint.bin");
    const Tile t = tile_from_image(read_image(dir / "tiles/synth_000001.ppm"), "t");
    const Tensor x = Tensor::from({1, 3, 16, 16}, t.pixels);
    Tape tape(Tape::Mode::kInference);
    const Tensor y = m.forward(tape, x, Tensor::zeros(m.latent_shape(1))).reconstruction;
    CHECK(p_trained == doctest::Approx(psnr(x, y, 2.0)).epsilon(1e-6));
    CHECK(s_trained == doctest::Approx(ssim(x, y, 2.0)).epsilon(1e-6));

    write_image(dir / "big.png", ImageU8{20, 20, 3, std::vector<std::uint8_t>(20 * 20 * 3, 9)});
    CHECK(cli("reconstruct --checkpoint trained/checkpoint.bin --image big.png --out r.png", dir).code == 1);
    CHECK(cli("reconstruct --checkpoint nothing.bin --image big.png --out r.png", dir).code == 1);
  }

  TEST_CASE("eval reproduces the training report") {
    TempDir dir("cli_eval");
    REQUIRE(cli("train --out run --set steps=5" + kTiny, dir).code == 0);
    const Result r = cli("eval --checkpoint run/checkpoint.bin --out ev", dir);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    CHECK(read_json(dir / "ev/report.json") == read_json(dir / "run/report.json"));
    CHECK(cli("eval --checkpoint run/checkpoint.bin --config ev/config.json --set base_channels=8", dir).code == 1);
  }

  TEST_CASE("gradcheck passes, and a corrupted backward rule fails with a name") {
    TempDir dir("cli_grad");
    Result ok = cli("gradcheck --out g", dir);
    CHECK_MESSAGE(ok.code == 0, ok.out);
    for (const char* m : {"worst conv", "worst dwt", "worst posterior", "worst relative error"}) {
      CHECK(ok.out.find(m) != std::string::npos);
    }
    CHECK(read_json(dir / "g/gradcheck.json")["passed"] == true);
    Result bad = cli("gradcheck --inject-fault reparameterize", dir);
    CHECK(bad.code == 3);
    CHECK(bad.out.find("FAILED: parameter") != std::string::npos);
    CHECK(cli("gradcheck --set model.input_size=32 --set data.size=32", dir).code == 1);
    CHECK(cli("gradcheck --set model.input_size=16 --set model.base_channels=4 --set model.latent_channels=3", dir).code == 0);
  }

  TEST_CASE("synth output is byte-identical across runs") {
    TempDir dir("cli_synth");
    REQUIRE(cli("synth --out a --set data.count=3 --set data.size=32 --seed 4", dir).code == 0);
    REQUIRE(cli("synth --out b --set data.count=3 --set data.size=32 --seed 4 --format ppm", dir).code == 0);
    REQUIRE(cli("synth --out c --set data.count=3 --set data.size=32 --seed 4 --format cache", dir).code == 0);
    for (const char* f : {"config.json", "synth_000000.ppm", "synth_000002.ppm"}) {
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    const Dataset cached = load_dataset_cache(dir / "c/tiles.xdat");
    CHECK(cached.size() == 3);
    CHECK(tile_from_image(read_image(dir / "a/synth_000002.ppm"), "x").pixels == cached.tiles[2].pixels);
  }

  TEST_CASE("compare writes both runs, the table, aligned curves and a manifest") {
    TempDir dir("cli_cmp");
    const Result r = cli("compare --out cmp --set steps=6 --seed 8" + kTiny, dir);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    CHECK(r.out.find("ExpDWT-VAE") != std::string::npos);
    const auto m = read_json(dir / "cmp/compare.json");
    CHECK(m["seed"] == 8);
    CHECK(m["runs"]["baseline"] == "baseline");
    CHECK(read_json(dir / "cmp/baseline/config.json")["seed"] == 8);
    CHECK(read_json(dir / "cmp/expdwt/config.json")["arch"] == "expdwt");
    const std::string curves = slurp(dir / "cmp/val_curves.csv");
    CHECK(curves.rfind("step,baseline,expdwt\n0,", 0) == 0);
    CHECK(slurp(dir / "cmp/table.txt").rfind("Model", 0) == 0);
  }

  TEST_CASE("non-finite losses exit 2") {
    TempDir dir("cli_nan");
    const Result r = cli("train --out run --set steps=30 --set learning_rate=1e30" + kTiny, dir);
    CHECK_MESSAGE(r.code == 2, r.out);
    CHECK(fs::exists(dir / "run/config.json"));
  }
}
