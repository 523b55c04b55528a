#include "gapdoor/nn/net.hpp"

#include <stdexcept>

#include "gapdoor/io.hpp"
#include "gapdoor/rng.hpp"

namespace gapdoor::nn {

Net& Net::add(LayerPtr layer) {
  if (built_) throw std::logic_error("Net: cannot add layers after build");
  layers_.push_back(std::move(layer));
  return *this;
}

void Net::build(const Shape& input_shape, uint64_t seed) {
  if (built_) throw std::logic_error("Net: already built");
  if (layers_.empty()) throw std::logic_error("Net: no layers");
  input_shape_ = input_shape;
  Rng rng(derive_seed(seed, "net.init"));
  Shape s = input_shape;
  for (auto& layer : layers_) s = layer->build(s, rng);
  built_ = true;
}

Tensor Net::forward(const Tensor& x, bool training) {
  if (!built_) throw std::logic_error("Net: forward before build");
  Tensor y = x;
  for (auto& layer : layers_) y = layer->forward(y, training);
  return y;
}

Tensor Net::forward_collect(const Tensor& x, std::vector<Tensor>& activations) {
  if (!built_) throw std::logic_error("Net: forward before build");
  activations.clear();
  Tensor y = x;
  for (auto& layer : layers_) {
    y = layer->forward(y, false);
    activations.push_back(y);
  }
  return y;
}

Tensor Net::backward(const Tensor& dy) {
  Tensor grad = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) grad = (*it)->backward(grad);
  return grad;
}

void Net::zero_grads() {
  for (auto& p : params())
    if (p.grad) p.grad->zero();
}

std::vector<ParamView> Net::params() {
  std::vector<ParamView> out;
  for (auto& layer : layers_)
    for (auto& p : layer->params()) out.push_back(p);
  return out;
}

int64_t Net::param_count() const {
  int64_t total = 0;
  for (const auto& layer : layers_) total += layer->param_count();
  return total;
}

double Net::reg_loss() const {
  double total = 0.0;
  for (const auto& layer : layers_) total += layer_reg_loss(*layer);
  return total;
}

const Shape& Net::output_shape() const {
  if (!built_) throw std::logic_error("Net: output shape before build");
  return layers_.back()->out_shape();
}

std::string Net::structure() const {
  std::string out = "input " + shape_str(input_shape_) + "\n";
  for (const auto& layer : layers_) {
    if (const auto* par = dynamic_cast<const Parallel*>(layer.get()))
      par->append_structure(out, "");
    else
      out += layer->describe() + "\n";
  }
  return out;
}

std::vector<Tensor> Net::snapshot_weights() const {
  std::vector<Tensor> snap;
  for (auto& p : const_cast<Net*>(this)->params()) snap.push_back(*p.value);
  return snap;
}

void Net::restore_weights(const std::vector<Tensor>& snap) {
  auto ps = params();
  if (snap.size() != ps.size()) throw std::invalid_argument("Net: snapshot size mismatch");
  for (size_t i = 0; i < ps.size(); ++i) {
    if (!snap[i].same_shape(*ps[i].value))
      throw std::invalid_argument("Net: snapshot tensor shape mismatch");
    *ps[i].value = snap[i];
  }
}

namespace {
constexpr uint32_t kWeightsMagic = 0x4744574d;  // "GDWM"
constexpr uint32_t kWeightsVersion = 1;
}  // namespace

void Net::save_weights(const std::filesystem::path& path) const {
  auto& self = const_cast<Net&>(*this);
  io::BinWriter w(path);
  w.u32(kWeightsMagic);
  w.u32(kWeightsVersion);
  w.u64(fnv1a64(structure()));
  auto ps = self.params();
  w.u64(ps.size());
  for (auto& p : ps) {
    const Tensor& t = *p.value;
    w.u32(static_cast<uint32_t>(t.shape().size()));
    for (auto d : t.shape()) w.i64(d);
    w.bytes(t.data(), static_cast<size_t>(t.size()) * sizeof(float));
  }
}

void Net::load_weights(const std::filesystem::path& path) {
  io::BinReader r(path);
  if (r.u32() != kWeightsMagic || r.u32() != kWeightsVersion)
    throw std::runtime_error("weights file: bad magic/version: " + path.string());
  if (r.u64() != fnv1a64(structure()))
    throw std::runtime_error("weights file: structure fingerprint mismatch: " + path.string());
  auto ps = params();
  if (r.u64() != ps.size()) throw std::runtime_error("weights file: parameter count mismatch");
  for (auto& p : ps) {
    const auto rank = r.u32();
    std::vector<int64_t> shape(rank);
    for (auto& d : shape) d = r.i64();
    if (shape != p.value->shape())
      throw std::runtime_error("weights file: tensor shape mismatch");
    r.bytes(p.value->data(), static_cast<size_t>(p.value->size()) * sizeof(float));
  }
}

}  // namespace gapdoor::nn
