#pragma once

#include <vector>

#include "gapdoor/nn/layers.hpp"

namespace gapdoor::nn {

/// Adam with the reference-framework update: per-step rate
/// lr*sqrt(1-b2^t)/(1-b1^t), epsilon added outside the bias correction.
/// Operates on trainable ParamViews only.
class Adam {
 public:
  explicit Adam(std::vector<ParamView> params, double lr = 0.001, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-7);
  void step();

  double lr() const { return lr_; }
  int64_t steps() const { return t_; }

 private:
  std::vector<ParamView> params_;
  std::vector<std::vector<float>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace gapdoor::nn
