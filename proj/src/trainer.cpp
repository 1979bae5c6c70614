#include "wavelatent/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "wavelatent/synth.hpp"

namespace wavelatent {

LossBreakdown train_step(const VaeModel& model, Adam& optimizer, const Tensor& batch, const TrainConfig& config,
                         Rng& sampling_rng) {
  Tape tape;
  const ForwardResult fwd = model.forward(tape, batch, sampling_rng);
  LossTerms terms = vae_loss(tape, batch, fwd, static_cast<float>(config.kl_weight), config.recon);
  const LossBreakdown values = terms.values();
  require_finite(values);
  tape.backward(terms.total);
  optimizer.step();
  optimizer.zero_grad();
  return values;
}

BatchSampler::BatchSampler(std::vector<std::size_t> indices, int batch_size, std::uint64_t seed)
    : indices_(std::move(indices)), batch_size_(batch_size), seed_(seed) {
  if (indices_.empty()) throw DataError("no training tiles");
  if (batch_size_ <= 0) throw std::invalid_argument("batch size must be positive");
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> batch;
  batch.reserve(static_cast<std::size_t>(batch_size_));
  while (batch.size() < static_cast<std::size_t>(batch_size_)) {
    if (cursor_ == order_.size()) {
      Rng rng = Rng::stream(seed_, "batches", epoch_++);
      order_ = rng.permutation(indices_.size());
      cursor_ = 0;
    }
    batch.push_back(indices_[order_[cursor_++]]);
  }
  return batch;
}

namespace {

Tensor slice_image(const Tensor& batch, int n) {
  const std::size_t per = batch.numel() / static_cast<std::size_t>(batch.dim(0));
  const auto d = batch.data().subspan(n * per, per);
  return Tensor::from({batch.dim(1), batch.dim(2), batch.dim(3)}, std::vector<float>(d.begin(), d.end()));
}

}  // namespace

Evaluation evaluate(const VaeModel& model, const Dataset& dataset, std::span<const std::size_t> indices,
                    const RunConfig& config) {
  if (indices.empty()) throw DataError("nothing to evaluate");
  Rng eval_rng = Rng::stream(config.seed, "eval");
  const std::size_t bs = static_cast<std::size_t>(config.train.batch_size);
  double recon = 0.0, kl = 0.0, psnr_sum = 0.0, ssim_sum = 0.0;
  std::vector<Tensor> means;
  for (std::size_t start = 0; start < indices.size(); start += bs) {
    const auto chunk = indices.subspan(start, std::min(bs, indices.size() - start));
    const Tensor batch = make_batch(dataset, chunk);
    Tape tape(Tape::Mode::kInference);
    const ForwardResult fwd = model.forward(tape, batch, eval_rng);
    const LossTerms terms = vae_loss(tape, batch, fwd, static_cast<float>(config.train.kl_weight), config.train.recon);
    const double weight = static_cast<double>(chunk.size());
    recon += terms.recon.item() * weight;
    kl += terms.kl.item() * weight;
    const Tensor mean_recon = model.decode(tape, fwd.posterior.mean);
    for (int n = 0; n < batch.dim(0); ++n) {
      const Tensor x = slice_image(batch, n);
      const Tensor y = slice_image(mean_recon, n);
      psnr_sum += psnr(x, y, 2.0);
      ssim_sum += ssim(x, y, 2.0);
      means.push_back(slice_image(fwd.posterior.mean, n));
    }
  }
  const double count = static_cast<double>(indices.size());
  Evaluation ev;
  ev.loss.recon = recon / count;
  ev.loss.kl = kl / count;
  ev.loss.total = ev.loss.recon + config.train.kl_weight * ev.loss.kl;
  ev.report.arch = std::string(architecture_name(model.architecture()));
  ev.report.latent_variance = means.size() >= 2 ? latent_variance(means) : 0.0;
  ev.report.psnr_db = psnr_sum / count;
  ev.report.ssim = ssim_sum / count;
  ev.report.num_eval_images = static_cast<int>(indices.size());
  ev.report.config_hash = protocol_hash(config);
  return ev;
}

TrainingRun run_training(const RunConfig& config, Dataset dataset, const ProgressFn& progress) {
  config.validate();
  assign_splits(dataset, config.seed, config.train.val_fraction);
  const auto train_idx = dataset.indices(Split::kTrain);
  auto val_idx = dataset.indices(Split::kVal);
  if (val_idx.empty()) val_idx = train_idx;

  Rng init_rng = Rng::stream(config.seed, "init");
  TrainingRun run{VaeModel(config.model, config.arch, init_rng), {}, {}};
  Adam optimizer(run.model.parameters(),
                 {static_cast<float>(config.train.learning_rate), static_cast<float>(config.train.beta1),
                  static_cast<float>(config.train.beta2), static_cast<float>(config.train.adam_epsilon)});
  BatchSampler sampler(train_idx, config.train.batch_size, config.seed);
  Rng sampling_rng = Rng::stream(config.seed, "sampling");

  auto emit = [&](CurveRow row) {
    run.curves.push_back(row);
    if (progress) progress(row);
  };
  Evaluation last = evaluate(run.model, dataset, val_idx, config);
  emit({0, last.loss, Split::kVal});
  for (int step = 1; step <= config.train.steps; ++step) {
    const auto idx = sampler.next();
    const LossBreakdown loss = train_step(run.model, optimizer, make_batch(dataset, idx), config.train, sampling_rng);
    emit({step, loss, Split::kTrain});
    if (step % config.train.eval_interval == 0 || step == config.train.steps) {
      last = evaluate(run.model, dataset, val_idx, config);
      require_finite(last.loss);
      emit({step, last.loss, Split::kVal});
    }
  }
  run.report = last.report;
  return run;
}

std::string curves_csv(const std::vector<CurveRow>& rows) {
  std::ostringstream os;
  os << "step,total,recon,kl,split\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%s\n", r.step, r.loss.total, r.loss.recon, r.loss.kl,
                  r.split == Split::kTrain ? "train" : "val");
    os << line;
  }
  return os.str();
}

Dataset load_dataset(const DataSpec& spec, std::uint64_t seed) {
  if (spec.source == "synth") return synth_tiles(spec.count, spec.size, seed);
  if (spec.source == "folder") return load_folder(spec.path, spec.size);
  if (spec.source == "cache") {
    Dataset ds = load_dataset_cache(spec.path);
    for (const auto& t : ds.tiles) {
      if (t.height != spec.size || t.width != spec.size) {
        throw DataError("cached tile '" + t.source_id + "' is " + std::to_string(t.height) + "x" +
                        std::to_string(t.width) + ", config expects " + std::to_string(spec.size));
      }
    }
    return ds;
  }
  throw ConfigError("unknown data source '" + spec.source + "'");
}

}  // namespace wavelatent
