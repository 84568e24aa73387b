#pragma once

#include <vector>

#include "sigcl/nn/layers.hpp"

namespace sigcl::nn {

// Adam over a fixed parameter list. Frozen parameters are skipped entirely,
// so their values stay bit-identical across steps.
class Adam {
 public:
  explicit Adam(std::vector<Param*> params, float lr = 1e-3f, float beta1 = 0.9f,
                float beta2 = 0.999f, float eps = 1e-8f);

  void step();
  void zero_grad() { nn::zero_grad(params_); }
  float learning_rate() const { return lr_; }
  long steps_taken() const { return t_; }

 private:
  std::vector<Param*> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  float lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace sigcl::nn
