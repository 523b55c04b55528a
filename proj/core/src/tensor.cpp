#include "gapdoor/tensor.hpp"

#include <numeric>
#include <sstream>

namespace gapdoor {

namespace {
int64_t shape_size(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("tensor dimension must be non-negative");
    n *= d;
  }
  return shape.empty() ? 0 : n;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_size(shape_)), 0.0f) {}

Tensor Tensor::full(std::vector<int64_t> shape, float v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

float& Tensor::at(int64_t i, int64_t j) {
  return data_[static_cast<size_t>(i * shape_[1] + j)];
}
float Tensor::at(int64_t i, int64_t j) const {
  return data_[static_cast<size_t>(i * shape_[1] + j)];
}
float& Tensor::at(int64_t i, int64_t j, int64_t k) {
  return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
}
float Tensor::at(int64_t i, int64_t j, int64_t k) const {
  return data_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
}
float& Tensor::at(int64_t i, int64_t j, int64_t k, int64_t l) {
  return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
}
float Tensor::at(int64_t i, int64_t j, int64_t k, int64_t l) const {
  return data_[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(std::vector<int64_t> shape) const {
  Tensor t;
  t.shape_ = std::move(shape);
  if (shape_size(t.shape_) != size())
    throw std::invalid_argument("reshape size mismatch: " + shape_str());
  t.data_ = data_;
  return t;
}

MatMap Tensor::mat(int64_t rows, int64_t cols) {
  if (rows * cols != size()) throw std::invalid_argument("mat view size mismatch");
  return MatMap(data(), rows, cols);
}
ConstMatMap Tensor::mat(int64_t rows, int64_t cols) const {
  if (rows * cols != size()) throw std::invalid_argument("mat view size mismatch");
  return ConstMatMap(data(), rows, cols);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << ')';
  return os.str();
}

}  // namespace gapdoor
