#include "gapdoor/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace gapdoor::nn {

namespace {

int64_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), int64_t{1}, std::multiplies<int64_t>());
}

float glorot_limit(int64_t fan_in, int64_t fan_out) {
  return std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
}

void fill_uniform(Tensor& t, Rng& rng, float lo, float hi) {
  for (int64_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * rng.uniform();
}

float apply_act(Activation a, float v) {
  switch (a) {
    case Activation::linear: return v;
    case Activation::relu: return v > 0.0f ? v : 0.0f;
    case Activation::elu: return v >= 0.0f ? v : std::expm1(v);
  }
  return v;
}

float act_grad(Activation a, float pre) {
  switch (a) {
    case Activation::linear: return 1.0f;
    case Activation::relu: return pre > 0.0f ? 1.0f : 0.0f;
    case Activation::elu: return pre >= 0.0f ? 1.0f : std::exp(pre);
  }
  return 1.0f;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
  }
  return "?";
}

// ---------------------------------------------------------------- Embedding

std::string Embedding::describe() const {
  return "Embedding(v=" + std::to_string(vocab_) + ",d=" + std::to_string(dim_) + ")";
}

Shape Embedding::build(const Shape& in, Rng& rng) {
  if (in.size() != 1)
    throw std::invalid_argument("Embedding: expects (T) per-sample input, got " + shape_str(in));
  in_shape_ = in;
  table_ = Tensor({vocab_, dim_});
  grad_ = Tensor({vocab_, dim_});
  fill_uniform(table_, rng, -0.05f, 0.05f);
  out_shape_ = {in[0], dim_};
  return out_shape_;
}

Tensor Embedding::forward(const Tensor& x, bool) {
  const int64_t n = x.dim(0), t = x.dim(1);
  last_ids_ = x;
  Tensor y({n, t, dim_});
  for (int64_t i = 0; i < n * t; ++i) {
    const auto id = static_cast<int64_t>(x[i]);
    if (id < 0 || id >= vocab_) throw std::out_of_range("Embedding: id outside vocabulary");
    std::copy(table_.data() + id * dim_, table_.data() + (id + 1) * dim_, y.data() + i * dim_);
  }
  return y;
}

Tensor Embedding::backward(const Tensor& dy) {
  const int64_t n = last_ids_.dim(0), t = last_ids_.dim(1);
  for (int64_t i = 0; i < n * t; ++i) {
    const auto id = static_cast<int64_t>(last_ids_[i]);
    float* g = grad_.data() + id * dim_;
    const float* d = dy.data() + i * dim_;
    for (int64_t k = 0; k < dim_; ++k) g[k] += d[k];
  }
  return Tensor({n, t});  // ids carry no gradient
}

std::vector<ParamView> Embedding::params() {
  return {{&table_, &grad_, true, "embedding"}};
}

// ------------------------------------------------------------------ Reshape

Shape Reshape::build(const Shape& in, Rng&) {
  in_shape_ = in;
  resolved_ = target_;
  int64_t known = 1;
  int infer = -1;
  for (size_t i = 0; i < resolved_.size(); ++i) {
    if (resolved_[i] == -1) {
      if (infer >= 0) throw std::invalid_argument("Reshape: multiple -1 extents");
      infer = static_cast<int>(i);
    } else {
      known *= resolved_[i];
    }
  }
  const int64_t total = shape_size(in);
  if (infer >= 0) {
    if (total % known != 0) throw std::invalid_argument("Reshape: cannot infer extent");
    resolved_[infer] = total / known;
  } else if (known != total) {
    throw std::invalid_argument("Reshape: element count mismatch");
  }
  out_shape_ = resolved_;
  return out_shape_;
}

Tensor Reshape::forward(const Tensor& x, bool) {
  Shape s = {x.dim(0)};
  s.insert(s.end(), resolved_.begin(), resolved_.end());
  return x.reshaped(s);
}

Tensor Reshape::backward(const Tensor& dy) {
  Shape s = {dy.dim(0)};
  s.insert(s.end(), in_shape_.begin(), in_shape_.end());
  return dy.reshaped(s);
}

// ------------------------------------------------------------------- Conv2D

std::string Conv2D::describe() const {
  std::string s = "Conv2D(f=" + std::to_string(filters_) + ",k=" + std::to_string(kh_) + "x" +
                  std::to_string(kw_) + ",pad=" + (pad_ == Padding::same ? "same" : "valid") +
                  ",act=" + activation_name(act_);
  if (l2_ > 0.0) s += ",l2=" + fmt_double(l2_);
  return s + ")";
}

Shape Conv2D::build(const Shape& in, Rng& rng) {
  if (in.size() != 3)
    throw std::invalid_argument("Conv2D: expects (H,W,C) input, got " + shape_str(in));
  in_shape_ = in;
  in_c_ = in[2];
  int64_t oh, ow;
  if (pad_ == Padding::same) {
    oh = in[0];
    ow = in[1];
    pad_top_ = (kh_ - 1) / 2;
    pad_left_ = (kw_ - 1) / 2;
  } else {
    oh = in[0] - kh_ + 1;
    ow = in[1] - kw_ + 1;
    pad_top_ = pad_left_ = 0;
    if (oh < 1 || ow < 1) throw std::invalid_argument("Conv2D: kernel larger than input");
  }
  kernel_ = Tensor({kh_, kw_, in_c_, filters_});
  bias_ = Tensor({filters_});
  dkernel_ = Tensor({kh_, kw_, in_c_, filters_});
  dbias_ = Tensor({filters_});
  const float lim = glorot_limit(kh_ * kw_ * in_c_, kh_ * kw_ * filters_);
  fill_uniform(kernel_, rng, -lim, lim);
  out_shape_ = {oh, ow, filters_};
  return out_shape_;
}

namespace {

// Gathers the receptive field of every output position of one sample into
// rows of `col` ((oh*ow) x (kh*kw*ic)); out-of-image taps read as zero.
void im2col(const float* x, int64_t h, int64_t w, int64_t c, int64_t kh, int64_t kw,
            int64_t oh, int64_t ow, int64_t pad_top, int64_t pad_left, MatRM& col) {
  for (int64_t oy = 0; oy < oh; ++oy)
    for (int64_t ox = 0; ox < ow; ++ox) {
      float* row = col.data() + (oy * ow + ox) * col.cols();
      for (int64_t ky = 0; ky < kh; ++ky) {
        const int64_t iy = oy + ky - pad_top;
        for (int64_t kx = 0; kx < kw; ++kx) {
          const int64_t ix = ox + kx - pad_left;
          float* dst = row + (ky * kw + kx) * c;
          if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
            std::fill(dst, dst + c, 0.0f);
          } else {
            const float* src = x + (iy * w + ix) * c;
            std::copy(src, src + c, dst);
          }
        }
      }
    }
}

// Scatter-adds column-space gradients back into image space.
void col2im_add(const MatRM& dcol, int64_t h, int64_t w, int64_t c, int64_t kh, int64_t kw,
                int64_t oh, int64_t ow, int64_t pad_top, int64_t pad_left, float* dx) {
  for (int64_t oy = 0; oy < oh; ++oy)
    for (int64_t ox = 0; ox < ow; ++ox) {
      const float* row = dcol.data() + (oy * ow + ox) * dcol.cols();
      for (int64_t ky = 0; ky < kh; ++ky) {
        const int64_t iy = oy + ky - pad_top;
        if (iy < 0 || iy >= h) continue;
        for (int64_t kx = 0; kx < kw; ++kx) {
          const int64_t ix = ox + kx - pad_left;
          if (ix < 0 || ix >= w) continue;
          const float* src = row + (ky * kw + kx) * c;
          float* dst = dx + (iy * w + ix) * c;
          for (int64_t i = 0; i < c; ++i) dst[i] += src[i];
        }
      }
    }
}

}  // namespace

Tensor Conv2D::forward(const Tensor& x, bool) {
  const int64_t n = x.dim(0), h = in_shape_[0], w = in_shape_[1];
  const int64_t oh = out_shape_[0], ow = out_shape_[1];
  const int64_t k = kh_ * kw_ * in_c_;
  last_x_ = x;
  last_pre_ = Tensor({n, oh, ow, filters_});

  MatRM col(oh * ow, k);
  const auto kmat = kernel_.mat(k, filters_);
  const auto bvec = bias_.vec();
  for (int64_t i = 0; i < n; ++i) {
    im2col(x.data() + i * h * w * in_c_, h, w, in_c_, kh_, kw_, oh, ow, pad_top_, pad_left_,
           col);
    MatMap out(last_pre_.data() + i * oh * ow * filters_, oh * ow, filters_);
    out.noalias() = col * kmat;
    out.rowwise() += bvec.transpose();
  }

  Tensor y = last_pre_;
  if (act_ != Activation::linear)
    for (int64_t i = 0; i < y.size(); ++i) y[i] = apply_act(act_, y[i]);
  return y;
}

Tensor Conv2D::backward(const Tensor& dy) {
  const int64_t n = last_x_.dim(0), h = in_shape_[0], w = in_shape_[1];
  const int64_t oh = out_shape_[0], ow = out_shape_[1];
  const int64_t k = kh_ * kw_ * in_c_;

  Tensor dpre = dy;
  if (act_ != Activation::linear)
    for (int64_t i = 0; i < dpre.size(); ++i) dpre[i] *= act_grad(act_, last_pre_[i]);

  Tensor dx({n, h, w, in_c_});
  MatRM col(oh * ow, k), dcol(oh * ow, k);
  auto dkmat = dkernel_.mat(k, filters_);
  auto dbvec = dbias_.vec();
  const auto kmat = kernel_.mat(k, filters_);
  for (int64_t i = 0; i < n; ++i) {
    im2col(last_x_.data() + i * h * w * in_c_, h, w, in_c_, kh_, kw_, oh, ow, pad_top_,
           pad_left_, col);
    ConstMatMap dout(dpre.data() + i * oh * ow * filters_, oh * ow, filters_);
    dkmat.noalias() += col.transpose() * dout;
    dbvec.noalias() += dout.colwise().sum().transpose();
    dcol.noalias() = dout * kmat.transpose();
    col2im_add(dcol, h, w, in_c_, kh_, kw_, oh, ow, pad_top_, pad_left_,
               dx.data() + i * h * w * in_c_);
  }
  if (l2_ > 0.0) dkernel_.vec() += 2.0f * static_cast<float>(l2_) * kernel_.vec();
  return dx;
}

std::vector<ParamView> Conv2D::params() {
  return {{&kernel_, &dkernel_, true, "conv.kernel"}, {&bias_, &dbias_, true, "conv.bias"}};
}

double Conv2D::reg_loss() const {
  if (l2_ <= 0.0) return 0.0;
  return l2_ * static_cast<double>(kernel_.vec().squaredNorm());
}

// ---------------------------------------------------------------- MaxPool2D

Shape MaxPool2D::build(const Shape& in, Rng&) {
  if (in.size() != 3)
    throw std::invalid_argument("MaxPool2D: expects (H,W,C) input, got " + shape_str(in));
  if (in[0] < ph_ || in[1] < pw_)
    throw std::invalid_argument("MaxPool2D: pool window larger than input");
  in_shape_ = in;
  out_shape_ = {(in[0] - ph_) / ph_ + 1, (in[1] - pw_) / pw_ + 1, in[2]};
  return out_shape_;
}

Tensor MaxPool2D::forward(const Tensor& x, bool) {
  const int64_t n = x.dim(0), h = in_shape_[0], w = in_shape_[1], c = in_shape_[2];
  const int64_t oh = out_shape_[0], ow = out_shape_[1];
  last_n_ = n;
  Tensor y({n, oh, ow, c});
  argmax_.assign(static_cast<size_t>(n * oh * ow * c), 0);
  for (int64_t i = 0; i < n; ++i) {
    const float* xi = x.data() + i * h * w * c;
    for (int64_t oy = 0; oy < oh; ++oy)
      for (int64_t ox = 0; ox < ow; ++ox)
        for (int64_t ch = 0; ch < c; ++ch) {
          float best = -std::numeric_limits<float>::infinity();
          int64_t best_idx = 0;
          for (int64_t py = 0; py < ph_; ++py)
            for (int64_t px = 0; px < pw_; ++px) {
              const int64_t idx = ((oy * ph_ + py) * w + ox * pw_ + px) * c + ch;
              if (xi[idx] > best) {
                best = xi[idx];
                best_idx = idx;
              }
            }
          const int64_t o = ((i * oh + oy) * ow + ox) * c + ch;
          y[o] = best;
          argmax_[static_cast<size_t>(o)] = i * h * w * c + best_idx;
        }
  }
  return y;
}

Tensor MaxPool2D::backward(const Tensor& dy) {
  Tensor dx({last_n_, in_shape_[0], in_shape_[1], in_shape_[2]});
  for (int64_t o = 0; o < dy.size(); ++o) dx[argmax_[static_cast<size_t>(o)]] += dy[o];
  return dx;
}

// ------------------------------------------------------------ GlobalAvgPool

Shape GlobalAvgPool::build(const Shape& in, Rng&) {
  if (in.size() == 3) {
    spatial_ = in[0] * in[1];
    channels_ = in[2];
  } else if (in.size() == 2) {
    spatial_ = in[0];
    channels_ = in[1];
  } else {
    throw std::invalid_argument("GlobalAvgPool: expects (H,W,C) or (T,D), got " + shape_str(in));
  }
  in_shape_ = in;
  out_shape_ = {channels_};
  return out_shape_;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
  const int64_t n = x.dim(0);
  Tensor y({n, channels_});
  const float inv = 1.0f / static_cast<float>(spatial_);
  for (int64_t i = 0; i < n; ++i) {
    const float* xi = x.data() + i * spatial_ * channels_;
    float* yi = y.data() + i * channels_;
    std::fill(yi, yi + channels_, 0.0f);
    for (int64_t s = 0; s < spatial_; ++s)
      for (int64_t c = 0; c < channels_; ++c) yi[c] += xi[s * channels_ + c];
    for (int64_t c = 0; c < channels_; ++c) yi[c] *= inv;
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  const int64_t n = dy.dim(0);
  Shape s = {n};
  s.insert(s.end(), in_shape_.begin(), in_shape_.end());
  Tensor dx(s);
  const float inv = 1.0f / static_cast<float>(spatial_);
  for (int64_t i = 0; i < n; ++i) {
    const float* di = dy.data() + i * channels_;
    float* xi = dx.data() + i * spatial_ * channels_;
    for (int64_t sp = 0; sp < spatial_; ++sp)
      for (int64_t c = 0; c < channels_; ++c) xi[sp * channels_ + c] = di[c] * inv;
  }
  return dx;
}

// ------------------------------------------------------------------ Flatten

Shape Flatten::build(const Shape& in, Rng&) {
  in_shape_ = in;
  out_shape_ = {shape_size(in)};
  return out_shape_;
}

Tensor Flatten::forward(const Tensor& x, bool) {
  return x.reshaped({x.dim(0), shape_size(in_shape_)});
}

Tensor Flatten::backward(const Tensor& dy) {
  Shape s = {dy.dim(0)};
  s.insert(s.end(), in_shape_.begin(), in_shape_.end());
  return dy.reshaped(s);
}

// -------------------------------------------------------------------- Dense

std::string Dense::describe() const {
  return "Dense(u=" + std::to_string(units_) + ",act=" + activation_name(act_) + ")";
}

Shape Dense::build(const Shape& in, Rng& rng) {
  if (in.size() != 1)
    throw std::invalid_argument("Dense: expects flat (F) input, got " + shape_str(in));
  in_shape_ = in;
  in_f_ = in[0];
  weight_ = Tensor({in_f_, units_});
  bias_ = Tensor({units_});
  dweight_ = Tensor({in_f_, units_});
  dbias_ = Tensor({units_});
  const float lim = glorot_limit(in_f_, units_);
  fill_uniform(weight_, rng, -lim, lim);
  out_shape_ = {units_};
  return out_shape_;
}

Tensor Dense::forward(const Tensor& x, bool) {
  const int64_t n = x.dim(0);
  last_x_ = x;
  last_pre_ = Tensor({n, units_});
  auto out = last_pre_.mat(n, units_);
  out.noalias() = x.mat(n, in_f_) * weight_.mat(in_f_, units_);
  out.rowwise() += bias_.vec().transpose();
  Tensor y = last_pre_;
  if (act_ != Activation::linear)
    for (int64_t i = 0; i < y.size(); ++i) y[i] = apply_act(act_, y[i]);
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  const int64_t n = last_x_.dim(0);
  Tensor dpre = dy;
  if (act_ != Activation::linear)
    for (int64_t i = 0; i < dpre.size(); ++i) dpre[i] *= act_grad(act_, last_pre_[i]);

  const auto x = last_x_.mat(n, in_f_);
  const auto d = dpre.mat(n, units_);
  dweight_.mat(in_f_, units_).noalias() += x.transpose() * d;
  dbias_.vec().noalias() += d.colwise().sum().transpose();
  Tensor dx({n, in_f_});
  dx.mat(n, in_f_).noalias() = d * weight_.mat(in_f_, units_).transpose();
  return dx;
}

std::vector<ParamView> Dense::params() {
  return {{&weight_, &dweight_, true, "dense.weight"}, {&bias_, &dbias_, true, "dense.bias"}};
}

// --------------------------------------------------------- ActivationLayer

Shape ActivationLayer::build(const Shape& in, Rng&) {
  in_shape_ = out_shape_ = in;
  return out_shape_;
}

Tensor ActivationLayer::forward(const Tensor& x, bool) {
  last_pre_ = x;
  Tensor y = x;
  for (int64_t i = 0; i < y.size(); ++i) y[i] = apply_act(act_, y[i]);
  return y;
}

Tensor ActivationLayer::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (int64_t i = 0; i < dx.size(); ++i) dx[i] *= act_grad(act_, last_pre_[i]);
  return dx;
}

// ------------------------------------------------------------------ Dropout

std::string Dropout::describe() const { return "Dropout(" + fmt_double(rate_) + ")"; }

Shape Dropout::build(const Shape& in, Rng& rng) {
  if (rate_ < 0.0 || rate_ >= 1.0)
    throw std::invalid_argument("Dropout: rate must be in [0,1)");
  in_shape_ = out_shape_ = in;
  rng_ = Rng(rng.next_u64());  // private mask stream, fixed by the build seed
  return out_shape_;
}

Tensor Dropout::forward(const Tensor& x, bool training) {
  if (!training || rate_ == 0.0) {
    masked_ = false;
    return x;
  }
  masked_ = true;
  const float keep = 1.0f - static_cast<float>(rate_);
  const float scale = 1.0f / keep;
  mask_ = Tensor(x.shape());
  Tensor y = x;
  for (int64_t i = 0; i < x.size(); ++i) {
    const float m = rng_.uniform() < keep ? scale : 0.0f;
    mask_[i] = m;
    y[i] *= m;
  }
  return y;
}

Tensor Dropout::backward(const Tensor& dy) {
  if (!masked_) return dy;
  Tensor dx = dy;
  for (int64_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
  return dx;
}

// ---------------------------------------------------------------- BatchNorm

std::string BatchNorm::describe() const {
  return "BatchNorm(m=" + fmt_double(momentum_) + ",eps=" + fmt_double(eps_) + ")";
}

Shape BatchNorm::build(const Shape& in, Rng&) {
  if (in.empty()) throw std::invalid_argument("BatchNorm: empty input shape");
  in_shape_ = out_shape_ = in;
  channels_ = in.back();
  gamma_ = Tensor::full({channels_}, 1.0f);
  beta_ = Tensor({channels_});
  dgamma_ = Tensor({channels_});
  dbeta_ = Tensor({channels_});
  moving_mean_ = Tensor({channels_});
  moving_var_ = Tensor::full({channels_}, 1.0f);
  return out_shape_;
}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
  const int64_t rows = x.size() / channels_;
  rows_ = rows;
  Tensor y(x.shape());

  if (!training) {
    std::vector<float> scale(channels_), shift(channels_);
    for (int64_t c = 0; c < channels_; ++c) {
      const float inv = 1.0f / std::sqrt(moving_var_[c] + static_cast<float>(eps_));
      scale[c] = gamma_[c] * inv;
      shift[c] = beta_[c] - moving_mean_[c] * scale[c];
    }
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < channels_; ++c)
        y[r * channels_ + c] = x[r * channels_ + c] * scale[c] + shift[c];
    return y;
  }

  std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < channels_; ++c) mean[c] += x[r * channels_ + c];
  for (auto& m : mean) m /= static_cast<double>(rows);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < channels_; ++c) {
      const double d = x[r * channels_ + c] - mean[c];
      var[c] += d * d;
    }
  for (auto& v : var) v /= static_cast<double>(rows);

  last_norm_ = Tensor(x.shape());
  inv_std_.resize(static_cast<size_t>(channels_));
  for (int64_t c = 0; c < channels_; ++c)
    inv_std_[c] = static_cast<float>(1.0 / std::sqrt(var[c] + eps_));
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < channels_; ++c) {
      const float norm =
          (x[r * channels_ + c] - static_cast<float>(mean[c])) * inv_std_[c];
      last_norm_[r * channels_ + c] = norm;
      y[r * channels_ + c] = gamma_[c] * norm + beta_[c];
    }
  const float mom = static_cast<float>(momentum_);
  for (int64_t c = 0; c < channels_; ++c) {
    moving_mean_[c] = mom * moving_mean_[c] + (1.0f - mom) * static_cast<float>(mean[c]);
    moving_var_[c] = mom * moving_var_[c] + (1.0f - mom) * static_cast<float>(var[c]);
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& dy) {
  const int64_t rows = rows_;
  std::vector<double> sum_dy(channels_, 0.0), sum_dy_norm(channels_, 0.0);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < channels_; ++c) {
      const float d = dy[r * channels_ + c];
      sum_dy[c] += d;
      sum_dy_norm[c] += d * last_norm_[r * channels_ + c];
    }
  for (int64_t c = 0; c < channels_; ++c) {
    dgamma_[c] += static_cast<float>(sum_dy_norm[c]);
    dbeta_[c] += static_cast<float>(sum_dy[c]);
  }
  Tensor dx(dy.shape());
  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < channels_; ++c) {
      const double d = dy[r * channels_ + c];
      const double norm = last_norm_[r * channels_ + c];
      dx[r * channels_ + c] = static_cast<float>(
          gamma_[c] * inv_std_[c] * (d - inv_rows * (sum_dy[c] + norm * sum_dy_norm[c])));
    }
  return dx;
}

std::vector<ParamView> BatchNorm::params() {
  return {{&gamma_, &dgamma_, true, "bn.gamma"},
          {&beta_, &dbeta_, true, "bn.beta"},
          {&moving_mean_, nullptr, false, "bn.moving_mean"},
          {&moving_var_, nullptr, false, "bn.moving_var"}};
}

// ----------------------------------------------------------------- Parallel

Parallel::Parallel(std::vector<std::vector<LayerPtr>> branches, int concat_axis)
    : branches_(std::move(branches)), concat_axis_(concat_axis) {
  if (branches_.empty()) throw std::invalid_argument("Parallel: no branches");
}

std::string Parallel::describe() const {
  return "Parallel(" + std::to_string(branches_.size()) +
         " branches,axis=" + std::to_string(concat_axis_) + ")";
}

Shape Parallel::build(const Shape& in, Rng& rng) {
  in_shape_ = in;
  branch_shapes_.clear();
  for (auto& branch : branches_) {
    Shape s = in;
    for (auto& layer : branch) s = layer->build(s, rng);
    branch_shapes_.push_back(s);
  }
  const auto& first = branch_shapes_.front();
  if (concat_axis_ < 0 || concat_axis_ >= static_cast<int>(first.size()))
    throw std::invalid_argument("Parallel: concat axis out of range");
  Shape out = first;
  for (size_t b = 1; b < branch_shapes_.size(); ++b) {
    const auto& s = branch_shapes_[b];
    if (s.size() != first.size())
      throw std::invalid_argument("Parallel: branch rank mismatch");
    for (size_t d = 0; d < s.size(); ++d) {
      if (static_cast<int>(d) == concat_axis_) continue;
      if (s[d] != first[d])
        throw std::invalid_argument("Parallel: branch shapes differ off the concat axis");
    }
    out[concat_axis_] += s[concat_axis_];
  }
  out_shape_ = out;
  return out_shape_;
}

Tensor Parallel::forward(const Tensor& x, bool training) {
  const int64_t n = x.dim(0);
  std::vector<Tensor> ys;
  ys.reserve(branches_.size());
  for (auto& branch : branches_) {
    Tensor y = x;
    for (auto& layer : branch) y = layer->forward(y, training);
    ys.push_back(std::move(y));
  }

  Shape out_s = {n};
  out_s.insert(out_s.end(), out_shape_.begin(), out_shape_.end());
  Tensor out(out_s);

  int64_t outer = 1, inner = 1;
  for (int d = 0; d < concat_axis_; ++d) outer *= out_shape_[d];
  for (size_t d = concat_axis_ + 1; d < out_shape_.size(); ++d) inner *= out_shape_[d];
  const int64_t total_axis = out_shape_[concat_axis_];

  for (int64_t i = 0; i < n; ++i)
    for (int64_t o = 0; o < outer; ++o) {
      int64_t off = 0;
      for (size_t b = 0; b < ys.size(); ++b) {
        const int64_t axis_b = branch_shapes_[b][concat_axis_];
        const int64_t chunk = axis_b * inner;
        const float* src = ys[b].data() + (i * outer + o) * chunk;
        float* dst = out.data() + ((i * outer + o) * total_axis + off) * inner;
        std::copy(src, src + chunk, dst);
        off += axis_b;
      }
    }
  return out;
}

Tensor Parallel::backward(const Tensor& dy) {
  const int64_t n = dy.dim(0);
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < concat_axis_; ++d) outer *= out_shape_[d];
  for (size_t d = concat_axis_ + 1; d < out_shape_.size(); ++d) inner *= out_shape_[d];
  const int64_t total_axis = out_shape_[concat_axis_];

  Tensor dx;
  int64_t off = 0;
  for (size_t b = 0; b < branches_.size(); ++b) {
    const int64_t axis_b = branch_shapes_[b][concat_axis_];
    Shape s = {n};
    s.insert(s.end(), branch_shapes_[b].begin(), branch_shapes_[b].end());
    Tensor dyb(s);
    const int64_t chunk = axis_b * inner;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t o = 0; o < outer; ++o) {
        const float* src = dy.data() + ((i * outer + o) * total_axis + off) * inner;
        float* dst = dyb.data() + (i * outer + o) * chunk;
        std::copy(src, src + chunk, dst);
      }
    off += axis_b;

    Tensor grad = std::move(dyb);
    for (auto it = branches_[b].rbegin(); it != branches_[b].rend(); ++it)
      grad = (*it)->backward(grad);
    if (dx.empty())
      dx = std::move(grad);
    else
      dx.vec() += grad.vec();
  }
  return dx;
}

std::vector<ParamView> Parallel::params() {
  std::vector<ParamView> out;
  for (auto& branch : branches_)
    for (auto& layer : branch)
      for (auto& p : layer->params()) out.push_back(p);
  return out;
}

int64_t Parallel::param_count() const {
  int64_t total = 0;
  for (const auto& branch : branches_)
    for (const auto& layer : branch) total += layer->param_count();
  return total;
}

double Parallel::reg_loss() const {
  double total = 0.0;
  for (const auto& branch : branches_)
    for (const auto& layer : branch) total += layer_reg_loss(*layer);
  return total;
}

void Parallel::append_structure(std::string& out, const std::string& indent) const {
  out += indent + describe() + "\n";
  for (size_t b = 0; b < branches_.size(); ++b) {
    out += indent + "  branch " + std::to_string(b) + ":\n";
    for (const auto& layer : branches_[b]) {
      if (const auto* nested = dynamic_cast<const Parallel*>(layer.get()))
        nested->append_structure(out, indent + "    ");
      else
        out += indent + "    " + layer->describe() + "\n";
    }
  }
}

double layer_reg_loss(const Layer& layer) {
  if (const auto* conv = dynamic_cast<const Conv2D*>(&layer)) return conv->reg_loss();
  if (const auto* par = dynamic_cast<const Parallel*>(&layer)) return par->reg_loss();
  return 0.0;
}

}  // namespace gapdoor::nn
