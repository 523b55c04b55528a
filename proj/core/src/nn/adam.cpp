#include "gapdoor/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace gapdoor::nn {

Adam::Adam(std::vector<ParamView> params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (auto& p : params) {
    if (!p.trainable) continue;
    if (!p.grad) throw std::invalid_argument("Adam: trainable parameter without gradient");
    params_.push_back(p);
    m_.emplace_back(static_cast<size_t>(p.value->size()), 0.0f);
    v_.emplace_back(static_cast<size_t>(p.value->size()), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  const double lr_t =
      lr_ * std::sqrt(1.0 - std::pow(beta2_, static_cast<double>(t_))) /
      (1.0 - std::pow(beta1_, static_cast<double>(t_)));
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float lr = static_cast<float>(lr_t), eps = static_cast<float>(eps_);
  for (size_t p = 0; p < params_.size(); ++p) {
    float* w = params_[p].value->data();
    const float* g = params_[p].grad->data();
    float* m = m_[p].data();
    float* v = v_[p].data();
    const int64_t n = params_[p].value->size();
    for (int64_t i = 0; i < n; ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      w[i] -= lr * m[i] / (std::sqrt(v[i]) + eps);
    }
  }
}

}  // namespace gapdoor::nn
