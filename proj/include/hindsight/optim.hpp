#pragma once

#include <vector>

#include "hindsight/graph.hpp"

namespace hindsight {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moments are sized to the ParameterSet it was built for.
class Adam {
 public:
  Adam() = default;
  Adam(const ParameterSet& params, AdamConfig cfg);

  // Consumes the accumulated gradients: every parameter must carry one.
  // Gradients are zeroed and params.step_count incremented afterwards.
  void step(ParameterSet& params);

  const AdamConfig& config() const noexcept { return cfg_; }
  void set_lr(double lr) noexcept { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
};

// Scales all gradients so their global L2 norm is at most max_norm. Returns
// the norm before scaling.
double clip_grad_norm(ParameterSet& params, double max_norm);

}  // namespace hindsight
