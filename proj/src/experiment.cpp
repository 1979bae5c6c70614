#include "wavelatent/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "wavelatent/checkpoint.hpp"

namespace wavelatent {

ExperimentResult run_experiment(const RunConfig& baseline, const RunConfig& expdwt, const Dataset& dataset,
                                const ProgressFn& progress) {
  if (baseline.arch != Architecture::kBaseline || expdwt.arch != Architecture::kExpDwt) {
    throw ConfigError("run_experiment expects a baseline and an expdwt config");
  }
  RunConfig same = expdwt;
  same.arch = baseline.arch;
  if (dump_config(same) != dump_config(baseline)) {
    throw ConfigError("comparison configs must differ only in the architecture tag");
  }
  ExperimentResult result{run_training(baseline, dataset, progress), run_training(expdwt, dataset, progress)};
  return result;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_run_config(const std::filesystem::path& dir, const RunConfig& config) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", dump_config(config));
}

void write_run_outputs(const std::filesystem::path& dir, const TrainingRun& run) {
  std::filesystem::create_directories(dir);
  write_text(dir / "curves.csv", curves_csv(run.curves));
  save_checkpoint(dir / "checkpoint.bin", run.model);
  write_text(dir / "report.json", to_json(run.report).dump(2) + "\n");
}

std::string comparison_table(const MetricReport& baseline, const MetricReport& expdwt) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof(line), "%-12s %12s %10s %8s\n", "Model", "Variance", "PSNR", "SSIM");
  os << line;
  for (const MetricReport* r : {&baseline, &expdwt}) {
    const char* name = r->arch == "baseline" ? "VAE" : "ExpDWT-VAE";
    std::snprintf(line, sizeof(line), "%-12s %12.4f %10.2f %8.4f\n", name, r->latent_variance, r->psnr_db, r->ssim);
    os << line;
  }
  return os.str();
}

std::string aligned_validation_curves(const TrainingRun& baseline, const TrainingRun& expdwt) {
  auto val_rows = [](const TrainingRun& r) {
    std::vector<CurveRow> out;
    for (const auto& row : r.curves) {
      if (row.split == Split::kVal) out.push_back(row);
    }
    return out;
  };
  const auto b = val_rows(baseline);
  const auto e = val_rows(expdwt);
  if (b.size() != e.size()) throw std::logic_error("validation step grids differ in length");
  std::ostringstream os;
  os << "step,baseline,expdwt\n";
  char line[96];
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i].step != e[i].step) throw std::logic_error("validation step grids differ");
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g\n", b[i].step, b[i].loss.recon, e[i].loss.recon);
    os << line;
  }
  return os.str();
}

}  // namespace wavelatent
