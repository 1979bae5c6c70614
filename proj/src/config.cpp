#include "wavelatent/config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "wavelatent/rng.hpp"

namespace wavelatent {

using nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size <= 0) throw ConfigError("train.batch_size must be positive");
  if (steps < 0) throw ConfigError("train.steps must be non-negative");
  if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be non-negative");
  if (!(kl_weight > 0.0)) throw ConfigError("train.kl_weight must be positive");
  if (eval_interval <= 0) throw ConfigError("train.eval_interval must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train.beta1/beta2 must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("train.adam_epsilon must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("train.val_fraction must lie in [0, 1)");
}

void DataSpec::validate() const {
  if (source != "synth" && source != "folder" && source != "cache") {
    throw ConfigError("data.source must be synth|folder|cache, got '" + source + "'");
  }
  if (source == "synth" && count <= 0) throw ConfigError("data.count must be positive");
  if (source != "synth" && path.empty()) throw ConfigError("data.path is required for source '" + source + "'");
  if (size < 16 || size % 2 != 0) throw ConfigError("data.size must be even and at least 16");
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  data.validate();
  if (data.size != model.input_size) {
    throw ConfigError("data.size (" + std::to_string(data.size) + ") must equal model.input_size (" +
                      std::to_string(model.input_size) + ")");
  }
}

json to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["arch"] = architecture_name(cfg.arch);
  j["model"] = {{"in_channels", cfg.model.in_channels},
                {"base_channels", cfg.model.base_channels},
                {"num_downsamples", cfg.model.num_downsamples},
                {"latent_channels", cfg.model.latent_channels},
                {"input_size", cfg.model.input_size},
                {"frequency_branch_weights", branch_weights_name(cfg.model.frequency_branch_weights)},
                {"activation", activation_name(cfg.model.activation)}};
  j["train"] = {{"batch_size", cfg.train.batch_size},
                {"steps", cfg.train.steps},
                {"learning_rate", cfg.train.learning_rate},
                {"kl_weight", cfg.train.kl_weight},
                {"eval_interval", cfg.train.eval_interval},
                {"recon", recon_loss_name(cfg.train.recon)},
                {"beta1", cfg.train.beta1},
                {"beta2", cfg.train.beta2},
                {"adam_epsilon", cfg.train.adam_epsilon},
                {"val_fraction", cfg.train.val_fraction}};
  j["data"] = {{"source", cfg.data.source}, {"path", cfg.data.path}, {"count", cfg.data.count}, {"size", cfg.data.size}};
  return j;
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig cfg;
  try {
    reject_unknown(j, {"seed", "arch", "model", "train", "data"}, "");
    read(j, "seed", cfg.seed);
    if (j.contains("arch")) cfg.arch = parse_architecture(j.at("arch").get<std::string>());
    if (j.contains("model")) {
      const auto& m = j.at("model");
      reject_unknown(m, {"in_channels", "base_channels", "num_downsamples", "latent_channels", "input_size",
                         "frequency_branch_weights", "activation"},
                     "model.");
      read(m, "in_channels", cfg.model.in_channels);
      read(m, "base_channels", cfg.model.base_channels);
      read(m, "num_downsamples", cfg.model.num_downsamples);
      read(m, "latent_channels", cfg.model.latent_channels);
      read(m, "input_size", cfg.model.input_size);
      if (m.contains("frequency_branch_weights")) {
        cfg.model.frequency_branch_weights = parse_branch_weights(m.at("frequency_branch_weights").get<std::string>());
      }
      if (m.contains("activation")) {
        try {
          cfg.model.activation = parse_activation(m.at("activation").get<std::string>());
        } catch (const std::invalid_argument& e) {
          throw ConfigError(e.what());
        }
      }
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      reject_unknown(t, {"batch_size", "steps", "learning_rate", "kl_weight", "eval_interval", "recon", "beta1",
                         "beta2", "adam_epsilon", "val_fraction"},
                     "train.");
      read(t, "batch_size", cfg.train.batch_size);
      read(t, "steps", cfg.train.steps);
      read(t, "learning_rate", cfg.train.learning_rate);
      read(t, "kl_weight", cfg.train.kl_weight);
      read(t, "eval_interval", cfg.train.eval_interval);
      if (t.contains("recon")) cfg.train.recon = parse_recon_loss(t.at("recon").get<std::string>());
      read(t, "beta1", cfg.train.beta1);
      read(t, "beta2", cfg.train.beta2);
      read(t, "adam_epsilon", cfg.train.adam_epsilon);
      read(t, "val_fraction", cfg.train.val_fraction);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      reject_unknown(d, {"source", "path", "count", "size"}, "data.");
      read(d, "source", cfg.data.source);
      read(d, "path", cfg.data.path);
      read(d, "count", cfg.data.count);
      read(d, "size", cfg.data.size);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  cfg.model.validate();
  cfg.train.validate();
  cfg.data.validate();
  return cfg;
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  // A bare key that is not top-level resolves to the unique section holding it.
  if (key.find('.') == std::string::npos && key != "seed" && key != "arch") {
    std::vector<std::string> hits;
    const json defaults = to_json(RunConfig{});
    for (const char* section : {"model", "train", "data"}) {
      if (defaults.at(section).contains(key)) hits.push_back(std::string(section) + "." + key);
    }
    if (hits.size() == 1) key = hits.front();
  }

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json j = to_json(RunConfig{});
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  }
  for (const auto& o : overrides) apply_override(j, o);
  return run_config_from_json(j);
}

std::string dump_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

std::string protocol_hash(const RunConfig& cfg) {
  json j = to_json(cfg);
  j.erase("arch");
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(j.dump());
  return os.str();
}

}  // namespace wavelatent
