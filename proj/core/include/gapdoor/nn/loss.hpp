#pragma once

#include <vector>

#include "gapdoor/tensor.hpp"

namespace gapdoor::nn {

struct LossResult {
  double loss = 0.0;   // mean over the batch
  Tensor dlogits;      // gradient of the mean loss w.r.t. the logits
};

/// Multiclass: logits (N,C) against integer labels; softmax + cross-entropy
/// fused for stability.
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Binary: logits (N,1) against {0,1} labels; numerically stable
/// log(1+exp) formulation.
LossResult sigmoid_binary_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// argmax over (N,C), or logit>0 for a single column.
std::vector<int> predict_classes(const Tensor& logits);

/// Fraction of correct predictions in [0,1].
double accuracy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace gapdoor::nn
