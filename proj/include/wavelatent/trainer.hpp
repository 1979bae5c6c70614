#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "wavelatent/config.hpp"
#include "wavelatent/dataset.hpp"
#include "wavelatent/losses.hpp"
#include "wavelatent/metrics.hpp"
#include "wavelatent/optimizer.hpp"

namespace wavelatent {

/// One forward, backward and Adam update on `batch`; gradients are zeroed
/// afterwards. Returns the pre-update loss. Throws NumericalError (before
/// touching the parameters) when a loss term is not finite.
LossBreakdown train_step(const VaeModel& model, Adam& optimizer, const Tensor& batch, const TrainConfig& config,
                         Rng& sampling_rng);

/// Cycles through the training indices in a fresh seeded permutation each
/// epoch.
class BatchSampler {
 public:
  BatchSampler(std::vector<std::size_t> indices, int batch_size, std::uint64_t seed);
  std::vector<std::size_t> next();

 private:
  std::vector<std::size_t> indices_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::uint64_t epoch_ = 0;
  int batch_size_;
  std::uint64_t seed_;
};

struct CurveRow {
  int step = 0;
  LossBreakdown loss;
  Split split = Split::kTrain;
};

struct Evaluation {
  LossBreakdown loss;
  MetricReport report;
};

/// Mean validation loss (sampled with a fixed "eval" stream, so repeated
/// evaluations are comparable) plus metrics on reconstructions decoded from
/// the posterior mean. Latent variance is taken over posterior means.
Evaluation evaluate(const VaeModel& model, const Dataset& dataset, std::span<const std::size_t> indices,
                    const RunConfig& config);

struct TrainingRun {
  VaeModel model;
  std::vector<CurveRow> curves;
  MetricReport report;
};

using ProgressFn = std::function<void(const CurveRow&)>;

/// Seeded training loop: validation rows at step 0, every eval_interval
/// steps and at the final step; a train row for every step. The dataset's
/// split is (re)assigned from the config seed.
TrainingRun run_training(const RunConfig& config, Dataset dataset, const ProgressFn& progress = {});

/// Header "step,total,recon,kl,split".
std::string curves_csv(const std::vector<CurveRow>& rows);

/// Materialises the dataset a config describes (synth, folder or cache).
Dataset load_dataset(const DataSpec& spec, std::uint64_t seed);

}  // namespace wavelatent
