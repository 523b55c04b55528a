#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "gapdoor/nn/layers.hpp"

namespace gapdoor::nn {

/// A sequential stack of layers (branching handled by the Parallel layer).
class Net {
 public:
  Net& add(LayerPtr layer);

  /// Allocates and initializes all parameters. Initialization order is the
  /// layer order, drawn from a stream derived from `seed`, so equal seeds
  /// give equal initial weights.
  void build(const Shape& input_shape, uint64_t seed);
  bool built() const { return built_; }

  Tensor forward(const Tensor& x, bool training);
  /// Inference-mode forward that also returns every layer's output
  /// (activations[i] = output of layers()[i]).
  Tensor forward_collect(const Tensor& x, std::vector<Tensor>& activations);
  /// Propagates loss gradients; parameter gradients accumulate into the
  /// layers (callers zero_grads() between steps).
  Tensor backward(const Tensor& dy);
  void zero_grads();

  std::vector<ParamView> params();
  int64_t param_count() const;
  double reg_loss() const;

  const std::vector<LayerPtr>& layers() const { return layers_; }
  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const;

  /// One line per layer (nested for Parallel); stable across runs and used
  /// as a fingerprint when persisting weights.
  std::string structure() const;

  /// Raw weight snapshot (all params() tensors in order).
  std::vector<Tensor> snapshot_weights() const;
  void restore_weights(const std::vector<Tensor>& snap);
  void save_weights(const std::filesystem::path& path) const;
  void load_weights(const std::filesystem::path& path);

 private:
  std::vector<LayerPtr> layers_;
  Shape input_shape_;
  bool built_ = false;
};

}  // namespace gapdoor::nn
