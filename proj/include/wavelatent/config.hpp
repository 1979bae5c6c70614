#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavelatent/losses.hpp"
#include "wavelatent/model.hpp"

namespace wavelatent {

struct TrainConfig {
  int batch_size = 8;
  int steps = 2000;
  double learning_rate = 1e-3;  // 1e-4 leaves the posterior near the prior after 2,000 steps
  double kl_weight = 1e-4;  // beta
  int eval_interval = 100;
  ReconLoss recon = ReconLoss::kL1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double val_fraction = 0.1;

  void validate() const;
};

/// Where tiles come from: "synth" (generated), "folder" (PNG/PPM directory)
/// or "cache" (XDAT file).
struct DataSpec {
  std::string source = "synth";
  std::string path;
  int count = 500;  // synth only
  int size = 64;

  void validate() const;
};

/// Fully resolved run configuration. All randomness derives from `seed`
/// through named streams.
struct RunConfig {
  std::uint64_t seed = 0;
  Architecture arch = Architecture::kExpDwt;
  EncoderConfig model;
  TrainConfig train;
  DataSpec data;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep their defaults; unknown keys and bad values throw ConfigError.
/// Each section is validated on its own; cross-section checks are left to
/// RunConfig::validate().
RunConfig run_config_from_json(const nlohmann::json& j);

/// Applies "dotted.key=value". The value is parsed as JSON when possible,
/// otherwise taken as a string. Later overrides win.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// An empty path starts from the defaults.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Canonical serialization used for config.json.
std::string dump_config(const RunConfig& cfg);

/// FNV-1a hash (hex) of the resolved config with the architecture removed,
/// so both runs of a comparison carry the same protocol hash.
std::string protocol_hash(const RunConfig& cfg);

}  // namespace wavelatent
