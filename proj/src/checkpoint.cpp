#include "wavelatent/checkpoint.hpp"

#include <algorithm>

namespace wavelatent {

Container to_container(const VaeModel& model) {
  const auto& cfg = model.config();
  Container c;
  std::copy(kCheckpointMagic.begin(), kCheckpointMagic.end(), c.magic.begin());
  c.version = kCheckpointVersion;
  c.tag = static_cast<std::int32_t>(model.architecture());
  c.fields = {cfg.in_channels,
              cfg.base_channels,
              cfg.num_downsamples,
              cfg.latent_channels,
              cfg.input_size,
              static_cast<std::int32_t>(cfg.frequency_branch_weights),
              cfg.activation == Activation::kSilu ? 0 : 1};
  for (const auto& p : model.parameters()) {
    c.records.push_back({p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
  }
  return c;
}

VaeModel from_container(const Container& c) {
  if (std::string_view(c.magic.data(), 4) != kCheckpointMagic) throw FormatError("not a checkpoint container");
  if (c.version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(c.version));
  }
  if (c.fields.size() != 7) throw FormatError("checkpoint header has " + std::to_string(c.fields.size()) + " fields");
  if (c.tag != 0 && c.tag != 1) throw FormatError("unknown architecture tag " + std::to_string(c.tag));
  if (c.fields[5] != 0 && c.fields[5] != 1) throw FormatError("bad frequency_branch_weights field");
  if (c.fields[6] != 0 && c.fields[6] != 1) throw FormatError("bad activation field");
  EncoderConfig cfg;
  cfg.in_channels = c.fields[0];
  cfg.base_channels = c.fields[1];
  cfg.num_downsamples = c.fields[2];
  cfg.latent_channels = c.fields[3];
  cfg.input_size = c.fields[4];
  cfg.frequency_branch_weights = static_cast<BranchWeights>(c.fields[5]);
  cfg.activation = c.fields[6] == 0 ? Activation::kSilu : Activation::kRelu;

  Rng unused(0);
  VaeModel model(cfg, static_cast<Architecture>(c.tag), unused);
  auto params = model.parameters();
  if (params.size() != c.records.size()) {
    throw FormatError("checkpoint has " + std::to_string(c.records.size()) + " records, model expects " +
                      std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto it = std::find_if(c.records.begin(), c.records.end(), [&](const auto& r) { return r.name == p.name; });
    if (it == c.records.end()) throw FormatError("checkpoint is missing parameter '" + p.name + "'");
    if (it->shape != p.tensor.shape()) {
      throw FormatError("parameter '" + p.name + "' has shape " + to_string(it->shape) + ", model expects " +
                        to_string(p.tensor.shape()));
    }
    std::copy(it->values.begin(), it->values.end(), p.tensor.mutable_data().begin());
  }
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const VaeModel& model) {
  write_container(path, to_container(model));
}

VaeModel load_checkpoint(const std::filesystem::path& path) {
  return from_container(read_container(path, kCheckpointMagic));
}

}  // namespace wavelatent
