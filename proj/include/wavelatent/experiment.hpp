#pragma once

#include <filesystem>
#include <string>

#include "wavelatent/trainer.hpp"

namespace wavelatent {

struct ExperimentResult {
  TrainingRun baseline;
  TrainingRun expdwt;
};

/// Trains baseline and expdwt on the same data from the same seed. The two
/// configs must be identical apart from the architecture tag.
ExperimentResult run_experiment(const RunConfig& baseline, const RunConfig& expdwt, const Dataset& dataset,
                                const ProgressFn& progress = {});

/// Writes config.json (call first, before training) into a run directory.
void write_run_config(const std::filesystem::path& dir, const RunConfig& config);
/// Writes curves.csv, checkpoint.bin and report.json.
void write_run_outputs(const std::filesystem::path& dir, const TrainingRun& run);

/// Fixed-width table with columns Model, Variance, PSNR, SSIM.
std::string comparison_table(const MetricReport& baseline, const MetricReport& expdwt);

/// Validation reconstruction loss of both runs on their shared step grid:
/// "step,baseline,expdwt". Throws if the grids differ.
std::string aligned_validation_curves(const TrainingRun& baseline, const TrainingRun& expdwt);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace wavelatent
