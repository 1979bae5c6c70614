#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wavelatent::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2, kVerification = 3 };

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const ConfigArgs& args, const std::string& out_dir);
int cmd_compare(const ConfigArgs& args, const std::string& out_dir);
int cmd_eval(const ConfigArgs& args, const std::string& checkpoint, const std::string& out_dir);
int cmd_reconstruct(const std::string& checkpoint, const std::string& image, const std::string& out_path);
int cmd_dwt(const std::string& image, const std::string& out_dir);

struct GradcheckArgs {
  ConfigArgs config;
  std::string out_dir;
  std::string fault_op;  // test fixture: corrupt this op's backward rule
  float fault_scale = 1.0f;
};
int cmd_gradcheck(const GradcheckArgs& args);

int cmd_synth(const ConfigArgs& args, const std::string& out_dir, const std::string& format);

}  // namespace wavelatent::cli
