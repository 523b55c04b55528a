#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gapdoor {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<MatRM>;
using ConstMatMap = Eigen::Map<const MatRM>;
using VecMap = Eigen::Map<Eigen::VectorXf>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXf>;

/// 64-byte-aligned allocator for tensor storage. Vectorized reductions peel
/// differently depending on where a buffer falls relative to SIMD lane
/// boundaries; pinning every allocation to one alignment makes float
/// accumulation bit-identical across repeated runs instead of varying with
/// heap layout.
template <typename T>
struct TensorAlloc {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  TensorAlloc() = default;
  template <typename U>
  TensorAlloc(const TensorAlloc<U>&) {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), kAlign));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const TensorAlloc<U>&) const {
    return true;
  }
};

/// Dense row-major float tensor, rank 1..4. Batches are NHWC.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::initializer_list<int64_t> shape)
      : Tensor(std::vector<int64_t>(shape)) {}

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, float v);

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  float& at(int64_t i, int64_t j);
  float at(int64_t i, int64_t j) const;
  float& at(int64_t i, int64_t j, int64_t k);
  float at(int64_t i, int64_t j, int64_t k) const;
  float& at(int64_t i, int64_t j, int64_t k, int64_t l);
  float at(int64_t i, int64_t j, int64_t k, int64_t l) const;

  void fill(float v);
  void zero() { fill(0.0f); }

  /// Reinterpret as a new shape with the same element count.
  Tensor reshaped(std::vector<int64_t> shape) const;

  /// 2-D Eigen view over the flat buffer; rows*cols must equal size().
  MatMap mat(int64_t rows, int64_t cols);
  ConstMatMap mat(int64_t rows, int64_t cols) const;
  VecMap vec() { return VecMap(data(), size()); }
  ConstVecMap vec() const { return ConstVecMap(data(), size()); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const;

 private:
  std::vector<int64_t> shape_;
  std::vector<float, TensorAlloc<float>> data_;
};

}  // namespace gapdoor
