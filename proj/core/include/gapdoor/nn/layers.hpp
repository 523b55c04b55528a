#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gapdoor/rng.hpp"
#include "gapdoor/tensor.hpp"

namespace gapdoor::nn {

/// Per-sample shape (batch dimension excluded).
using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);

enum class Activation { linear, relu, elu };

std::string activation_name(Activation a);

/// A handle onto one parameter tensor and its gradient accumulator.
/// Non-trainable entries (batch-norm running statistics) are serialized
/// and counted but skipped by the optimizer.
struct ParamView {
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
  bool trainable = true;
  std::string tag;
};

/// Feed-forward layer. Lifecycle: construct with hyperparameters, then
/// build(input_shape, rng) exactly once, then forward/backward in lockstep
/// (backward consumes the cached activations of the latest forward).
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  /// One-line hyperparameter summary (configuration, not derived shapes);
  /// identical lines mean identical layer configuration.
  virtual std::string describe() const = 0;

  virtual Shape build(const Shape& in, Rng& rng) = 0;  // returns output shape
  virtual Tensor forward(const Tensor& x, bool training) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;

  virtual std::vector<ParamView> params() { return {}; }
  virtual int64_t param_count() const { return 0; }

  const Shape& in_shape() const { return in_shape_; }
  const Shape& out_shape() const { return out_shape_; }

 protected:
  Shape in_shape_, out_shape_;
};

using LayerPtr = std::unique_ptr<Layer>;

/// Trainable lookup table: (N,T) integer-valued ids -> (N,T,dim).
/// Rows initialize uniform(-0.05, 0.05); the pad id stays trainable.
class Embedding final : public Layer {
 public:
  Embedding(int64_t vocab, int64_t dim) : vocab_(vocab), dim_(dim) {}
  std::string kind() const override { return "Embedding"; }
  std::string describe() const override;
  Shape build(const Shape& in, Rng& rng) override;
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamView> params() override;
  int64_t param_count() const override { return vocab_ * dim_; }

 private:
  int64_t vocab_, dim_;
  Tensor table_, grad_;
  Tensor last_ids_;
};

/// Per-sample reshape; -1 in the target infers the remaining extent.
class Reshape final : public Layer {
 public:
  explicit Reshape(Shape target) : target_(std::move(target)) {}
  std::string kind() const override { return "Reshape"; }
  std::string describe() const override { return "Reshape(" + shape_str(target_) + ")"; }
  Shape build(const Shape& in, Rng& rng) override;
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Shape target_, resolved_;
};

enum class Padding { valid, same };

/// Stride-1 2-D convolution over NHWC with optional fused activation and
/// L2 weight penalty (applied to the kernel only, as 2*l2*W on the
/// gradient plus l2*|W|^2 on the reported loss).
class Conv2D final : public Layer {
 public:
  Conv2D(int64_t filters, int64_t kh, int64_t kw, Padding pad, Activation act,
         double l2 = 0.0)
      : filters_(filters), kh_(kh), kw_(kw), pad_(pad), act_(act), l2_(l2) {}
  std::string kind() const override { return "Conv2D"; }
  std::string describe() const override;
  Shape build(const Shape& in, Rng& rng) override;
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamView> params() override;
  int64_t param_count() const override { return kh_ * kw_ * in_c_ * filters_ + filters_; }
  double reg_loss() const;

 private:
  int64_t filters_, kh_, kw_;
  Padding pad_;
  Activation act_;
  double l2_;
  int64_t in_c_ = 0, pad_top_ = 0, pad_left_ = 0;
  Tensor kernel_, bias_, dkernel_, dbias_;
  Tensor last_x_, last_pre_;  // pre-activation cache for the fused activation
};

/// Non-overlapping max pooling (stride = pool size), valid padding.
class MaxPool2D final : public Layer {
 public:
  MaxPool2D(int64_t ph, int64_t pw) : ph_(ph), pw_(pw) {}
  std::string kind() const override { return "MaxPool2D"; }
  std::string describe() const override {
    return "MaxPool2D(" + std::to_string(ph_) + "x" + std::to_string(pw_) + ")";
  }
  Shape build(const Shape& in, Rng& rng) override;
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int64_t ph_, pw_;
  std::vector<int64_t> argmax_;
  int64_t last_n_ = 0;
};

/// Spatial average: (N,H,W,C) -> (N,C), or (N,T,D) -> (N,D).
class GlobalAvgPool final : public Layer {
 public:
  std::string kind() const override { return "GlobalAvgPool"; }
  std::string describe() const override { return "GlobalAvgPool()"; }
  Shape build(const Shape& in, Rng& rng) override;
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int64_t spatial_ = 0, channels_ = 0;
};

class Flatten final : public Layer {
 public:
  std::string kind() const override { return "Flatten"; }
  std::string describe() const override { return "Flatten()"; }
  Shape build(const Shape& in, Rng& rng) override;
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
};

/// Fully connected (N,F) -> (N,U) with optional fused activation.
class Dense final : public Layer {
 public:
  Dense(int64_t units, Activation act) : units_(units), act_(act) {}
  std::string kind() const override { return "Dense"; }
  std::string describe() const override;
  Shape build(const Shape& in, Rng& rng) override;
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamView> params() override;
  int64_t param_count() const override { return in_f_ * units_ + units_; }

 private:
  int64_t units_;
  Activation act_;
  int64_t in_f_ = 0;
  Tensor weight_, bias_, dweight_, dbias_;
  Tensor last_x_, last_pre_;
};

/// Standalone activation (for places where fusion is inconvenient).
class ActivationLayer final : public Layer {
 public:
  explicit ActivationLayer(Activation act) : act_(act) {}
  std::string kind() const override { return "Activation"; }
  std::string describe() const override { return "Activation(" + activation_name(act_) + ")"; }
  Shape build(const Shape& in, Rng& rng) override;
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Activation act_;
  Tensor last_pre_;
};

/// Inverted dropout: mask/(1-rate) while training, identity at inference.
/// The mask stream is seeded at build time so runs are reproducible.
class Dropout final : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {}
  std::string kind() const override { return "Dropout"; }
  std::string describe() const override;
  Shape build(const Shape& in, Rng& rng) override;
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;

 private:
  double rate_;
  Rng rng_{0};
  Tensor mask_;
  bool masked_ = false;
};

/// Channel-wise batch normalization over NHWC (statistics over N*H*W).
/// Running statistics update as 0.99*old + 0.01*batch and are reported in
/// the parameter count (4 per channel) but not touched by the optimizer.
class BatchNorm final : public Layer {
 public:
  BatchNorm(double momentum = 0.99, double eps = 1e-3) : momentum_(momentum), eps_(eps) {}
  std::string kind() const override { return "BatchNorm"; }
  std::string describe() const override;
  Shape build(const Shape& in, Rng& rng) override;
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamView> params() override;
  int64_t param_count() const override { return 4 * channels_; }

 private:
  double momentum_, eps_;
  int64_t channels_ = 0, rows_ = 0;
  Tensor gamma_, beta_, dgamma_, dbeta_;
  Tensor moving_mean_, moving_var_;
  Tensor last_norm_;            // normalized activations cache
  std::vector<float> inv_std_;  // per-channel 1/sqrt(var+eps) of the batch
};

/// Runs several layer stacks on the same input and concatenates the
/// branch outputs along one per-sample axis (0-based, batch excluded).
class Parallel final : public Layer {
 public:
  Parallel(std::vector<std::vector<LayerPtr>> branches, int concat_axis);
  std::string kind() const override { return "Parallel"; }
  std::string describe() const override;
  Shape build(const Shape& in, Rng& rng) override;
  Tensor forward(const Tensor& x, bool training) override;
  Tensor backward(const Tensor& dy) override;
  std::vector<ParamView> params() override;
  int64_t param_count() const override;
  double reg_loss() const;
  /// Nested one-line-per-layer dump used by Net::structure().
  void append_structure(std::string& out, const std::string& indent) const;

 private:
  std::vector<std::vector<LayerPtr>> branches_;
  int concat_axis_;
  std::vector<Shape> branch_shapes_;
};

/// Sum of L2 penalties across a layer list (Conv2D and nested Parallel).
double layer_reg_loss(const Layer& layer);

}  // namespace gapdoor::nn
