#include "gapdoor/nn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gapdoor::nn {

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  const int64_t n = logits.dim(0), c = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
  LossResult r;
  r.dlogits = Tensor(logits.shape());
  double total = 0.0;
  const float inv_n = 1.0f / static_cast<float>(n);
  for (int64_t i = 0; i < n; ++i) {
    const float* z = logits.data() + i * c;
    float* d = r.dlogits.data() + i * c;
    const float zmax = *std::max_element(z, z + c);
    double sum = 0.0;
    for (int64_t j = 0; j < c; ++j) sum += std::exp(static_cast<double>(z[j] - zmax));
    const double log_sum = std::log(sum);
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= c) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    total += log_sum - (z[y] - zmax);
    for (int64_t j = 0; j < c; ++j) {
      const float p = static_cast<float>(std::exp(static_cast<double>(z[j] - zmax)) / sum);
      d[j] = (p - (j == y ? 1.0f : 0.0f)) * inv_n;
    }
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

LossResult sigmoid_binary_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  const int64_t n = logits.dim(0);
  if (logits.size() != n)
    throw std::invalid_argument("sigmoid_bce: logits must be (N,1)");
  if (static_cast<int64_t>(labels.size()) != n)
    throw std::invalid_argument("sigmoid_bce: label count mismatch");
  LossResult r;
  r.dlogits = Tensor(logits.shape());
  double total = 0.0;
  const float inv_n = 1.0f / static_cast<float>(n);
  for (int64_t i = 0; i < n; ++i) {
    const double z = logits[i];
    const double y = labels[static_cast<size_t>(i)];
    // max(z,0) - z*y + log(1+exp(-|z|)) is exact and overflow-free.
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    const double sig = 1.0 / (1.0 + std::exp(-z));
    r.dlogits[i] = static_cast<float>(sig - y) * inv_n;
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

std::vector<int> predict_classes(const Tensor& logits) {
  const int64_t n = logits.dim(0);
  const int64_t c = logits.rank() == 2 ? logits.dim(1) : 1;
  std::vector<int> out(static_cast<size_t>(n));
  if (c == 1) {
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = logits[i] > 0.0f ? 1 : 0;
    return out;
  }
  for (int64_t i = 0; i < n; ++i) {
    const float* z = logits.data() + i * c;
    out[static_cast<size_t>(i)] =
        static_cast<int>(std::max_element(z, z + c) - z);
  }
  return out;
}

double accuracy(const Tensor& logits, const std::vector<int>& labels) {
  if (labels.empty()) throw std::invalid_argument("accuracy: empty label set");
  const auto pred = predict_classes(logits);
  int64_t correct = 0;
  for (size_t i = 0; i < labels.size(); ++i)
    if (pred[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace gapdoor::nn
