#pragma once

#include <vector>

#include "wavelatent/model.hpp"

namespace wavelatent {

struct AdamConfig {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

/// Adam with bias-corrected first and second moments.
class Adam {
 public:
  Adam(std::vector<NamedParameter> params, AdamConfig config);

  /// Applies one update from the current gradients.
  void step();
  void zero_grad();
  long steps() const { return t_; }

 private:
  std::vector<NamedParameter> params_;
  AdamConfig config_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  long t_ = 0;
};

}  // namespace wavelatent
