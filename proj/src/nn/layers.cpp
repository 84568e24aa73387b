#include "sigcl/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sigcl/simd/kernels.hpp"

namespace sigcl {

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

}  // namespace sigcl

namespace sigcl::nn {

void init_uniform_fan_in(Param& p, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (float& v : p.value) v = static_cast<float>(uniform(rng, -bound, bound));
}

void transpose(const float* in, std::size_t rows, std::size_t cols, float* out) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    const std::size_t r1 = std::min(rows, r0 + kBlock);
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = in[r * cols + c];
    }
  }
}

void matmul(const float* a, std::size_t a_rows, std::size_t a_cols, bool transpose_a,
            const float* b, std::size_t b_rows, std::size_t b_cols, bool transpose_b, float* out,
            bool accumulate) {
  std::vector<float> at, bt;
  std::size_t m = a_rows, k = a_cols;
  if (transpose_a) {
    at.resize(a_rows * a_cols);
    transpose(a, a_rows, a_cols, at.data());
    a = at.data();
    m = a_cols;
    k = a_rows;
  }
  std::size_t kb = b_rows, n = b_cols;
  if (transpose_b) {
    bt.resize(b_rows * b_cols);
    transpose(b, b_rows, b_cols, bt.data());
    b = bt.data();
    kb = b_cols;
    n = b_rows;
  }
  if (k != kb) throw std::invalid_argument("matmul: inner dimensions differ");
  simd::kernels().gemm(m, n, k, a, k, b, n, out, n, accumulate);
}

void zero_grad(const std::vector<Param*>& params) {
  for (Param* p : params) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

std::size_t parameter_count(const std::vector<Param*>& params) {
  std::size_t n = 0;
  for (const Param* p : params) n += p->size();
  return n;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, const std::string& name)
    : in_(in), out_(out), weight_(name + ".weight", {in, out}), bias_(name + ".bias", {out}) {
  init_uniform_fan_in(weight_, in, rng);
  init_uniform_fan_in(bias_, in, rng);
}

Tensor Linear::forward(const Tensor& x, Mode) {
  if (x.rank() != 2 || x.dim(1) != in_)
    throw std::invalid_argument("Linear: expected [B," + std::to_string(in_) + "], got " +
                                shape_string(x.shape()));
  const std::size_t batch = x.dim(0);
  input_ = x;
  Tensor y({batch, out_});
  for (std::size_t b = 0; b < batch; ++b)
    std::copy(bias_.value.begin(), bias_.value.end(), y.data() + b * out_);
  simd::kernels().gemm(batch, out_, in_, x.data(), in_, weight_.value.data(), out_, y.data(), out_,
                       true);
  return y;
}

Tensor Linear::backward(const Tensor& gy) {
  const std::size_t batch = input_.dim(0);
  for (std::size_t b = 0; b < batch; ++b)
    simd::kernels().axpy(1.0f, gy.data() + b * out_, bias_.grad.data(), out_);
  matmul(input_.data(), batch, in_, true, gy.data(), batch, out_, false, weight_.grad.data(), true);
  Tensor gx({batch, in_});
  matmul(gy.data(), batch, out_, false, weight_.value.data(), in_, out_, true, gx.data(), false);
  return gx;
}

void Linear::collect_parameters(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------- Relu

Tensor Relu::forward(const Tensor& x, Mode) {
  input_ = x;
  Tensor y(x.shape());
  simd::kernels().relu_forward(x.data(), y.data(), x.size());
  return y;
}

Tensor Relu::backward(const Tensor& gy) {
  Tensor gx(input_.shape());
  simd::kernels().relu_backward(input_.data(), gy.data(), gx.data(), gy.size());
  return gx;
}

// ---------------------------------------------------------------- Dropout

Tensor Dropout::forward(const Tensor& x, Mode mode) {
  if (mode == Mode::eval || p_ <= 0.0f) {
    mask_.assign(x.size(), 1.0f);
    return x;
  }
  const float keep_scale = 1.0f / (1.0f - p_);
  mask_.resize(x.size());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = uniform01(rng_) < p_ ? 0.0f : keep_scale;
    y[i] = x[i] * mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& gy) {
  Tensor gx(gy.shape());
  for (std::size_t i = 0; i < gy.size(); ++i) gx[i] = gy[i] * mask_[i];
  return gx;
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
               std::size_t pad, Rng& rng, const std::string& name)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      weight_(name + ".weight", {out_ch, in_ch * kernel}), bias_(name + ".bias", {out_ch}) {
  init_uniform_fan_in(weight_, in_ch * kernel, rng);
  init_uniform_fan_in(bias_, in_ch * kernel, rng);
}

Tensor Conv1d::forward(const Tensor& x, Mode) {
  if (x.rank() != 3 || x.dim(0) != in_ch_)
    throw std::invalid_argument("Conv1d: expected [" + std::to_string(in_ch_) + ",B,L], got " +
                                shape_string(x.shape()));
  const std::size_t batch = x.dim(1), len = x.dim(2);
  if (len + 2 * pad_ < kernel_) throw std::invalid_argument("Conv1d: input shorter than kernel");
  const std::size_t lout = output_length(len);
  const std::size_t cols = batch * lout;
  in_shape_ = x.shape();
  col_.assign(in_ch_ * kernel_ * cols, 0.0f);
  for (std::size_t c = 0; c < in_ch_; ++c) {
    for (std::size_t t = 0; t < kernel_; ++t) {
      float* row = col_.data() + (c * kernel_ + t) * cols;
      for (std::size_t b = 0; b < batch; ++b) {
        const float* src = x.data() + (c * batch + b) * len;
        for (std::size_t o = 0; o < lout; ++o) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(o * stride_ + t) -
                                     static_cast<std::ptrdiff_t>(pad_);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) row[b * lout + o] = src[pos];
        }
      }
    }
  }
  Tensor y({out_ch_, batch, lout});
  for (std::size_t oc = 0; oc < out_ch_; ++oc)
    std::fill(y.data() + oc * cols, y.data() + (oc + 1) * cols, bias_.value[oc]);
  simd::kernels().gemm(out_ch_, cols, in_ch_ * kernel_, weight_.value.data(), in_ch_ * kernel_,
                       col_.data(), cols, y.data(), cols, true);
  return y;
}

Tensor Conv1d::backward(const Tensor& gy) {
  const std::size_t batch = in_shape_[1], len = in_shape_[2];
  const std::size_t lout = gy.dim(2);
  const std::size_t cols = batch * lout;
  const std::size_t krows = in_ch_ * kernel_;
  for (std::size_t oc = 0; oc < out_ch_; ++oc) {
    const float* g = gy.data() + oc * cols;
    double acc = 0.0;
    for (std::size_t i = 0; i < cols; ++i) acc += g[i];
    bias_.grad[oc] += static_cast<float>(acc);
  }
  matmul(gy.data(), out_ch_, cols, false, col_.data(), krows, cols, true, weight_.grad.data(), true);
  std::vector<float> dcol(krows * cols);
  matmul(weight_.value.data(), out_ch_, krows, true, gy.data(), out_ch_, cols, false, dcol.data(),
         false);
  Tensor gx(in_shape_);
  for (std::size_t c = 0; c < in_ch_; ++c) {
    for (std::size_t t = 0; t < kernel_; ++t) {
      const float* row = dcol.data() + (c * kernel_ + t) * cols;
      for (std::size_t b = 0; b < batch; ++b) {
        float* dst = gx.data() + (c * batch + b) * len;
        for (std::size_t o = 0; o < lout; ++o) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(o * stride_ + t) -
                                     static_cast<std::ptrdiff_t>(pad_);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(len)) dst[pos] += row[b * lout + o];
        }
      }
    }
  }
  return gx;
}

void Conv1d::collect_parameters(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
               std::size_t pad, Rng& rng, const std::string& name)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      weight_(name + ".weight", {out_ch, in_ch * kernel * kernel}), bias_(name + ".bias", {out_ch}) {
  init_uniform_fan_in(weight_, in_ch * kernel * kernel, rng);
  init_uniform_fan_in(bias_, in_ch * kernel * kernel, rng);
}

Tensor Conv2d::forward(const Tensor& x, Mode) {
  if (x.rank() != 4 || x.dim(0) != in_ch_)
    throw std::invalid_argument("Conv2d: expected [" + std::to_string(in_ch_) + ",B,H,W], got " +
                                shape_string(x.shape()));
  const std::size_t batch = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = output_extent(h), wo = output_extent(w);
  const std::size_t plane = ho * wo;
  const std::size_t cols = batch * plane;
  const std::size_t kk = kernel_ * kernel_;
  in_shape_ = x.shape();
  col_.assign(in_ch_ * kk * cols, 0.0f);
  const auto ipad = static_cast<std::ptrdiff_t>(pad_);
  for (std::size_t c = 0; c < in_ch_; ++c) {
    for (std::size_t ky = 0; ky < kernel_; ++ky) {
      for (std::size_t kx = 0; kx < kernel_; ++kx) {
        float* row = col_.data() + (c * kk + ky * kernel_ + kx) * cols;
        for (std::size_t b = 0; b < batch; ++b) {
          const float* src = x.data() + (c * batch + b) * h * w;
          float* dst = row + b * plane;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - ipad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) - ipad;
              if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w))
                dst[oy * wo + ox] = src[iy * static_cast<std::ptrdiff_t>(w) + ix];
            }
          }
        }
      }
    }
  }
  Tensor y({out_ch_, batch, ho, wo});
  for (std::size_t oc = 0; oc < out_ch_; ++oc)
    std::fill(y.data() + oc * cols, y.data() + (oc + 1) * cols, bias_.value[oc]);
  simd::kernels().gemm(out_ch_, cols, in_ch_ * kk, weight_.value.data(), in_ch_ * kk, col_.data(),
                       cols, y.data(), cols, true);
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  const std::size_t batch = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  const std::size_t ho = gy.dim(2), wo = gy.dim(3);
  const std::size_t plane = ho * wo;
  const std::size_t cols = batch * plane;
  const std::size_t kk = kernel_ * kernel_;
  const std::size_t krows = in_ch_ * kk;
  for (std::size_t oc = 0; oc < out_ch_; ++oc) {
    const float* g = gy.data() + oc * cols;
    double acc = 0.0;
    for (std::size_t i = 0; i < cols; ++i) acc += g[i];
    bias_.grad[oc] += static_cast<float>(acc);
  }
  matmul(gy.data(), out_ch_, cols, false, col_.data(), krows, cols, true, weight_.grad.data(), true);
  std::vector<float> dcol(krows * cols);
  matmul(weight_.value.data(), out_ch_, krows, true, gy.data(), out_ch_, cols, false, dcol.data(),
         false);
  Tensor gx(in_shape_);
  const auto ipad = static_cast<std::ptrdiff_t>(pad_);
  for (std::size_t c = 0; c < in_ch_; ++c) {
    for (std::size_t ky = 0; ky < kernel_; ++ky) {
      for (std::size_t kx = 0; kx < kernel_; ++kx) {
        const float* row = dcol.data() + (c * kk + ky * kernel_ + kx) * cols;
        for (std::size_t b = 0; b < batch; ++b) {
          float* dst = gx.data() + (c * batch + b) * h * w;
          const float* src = row + b * plane;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - ipad;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) - ipad;
              if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w))
                dst[iy * static_cast<std::ptrdiff_t>(w) + ix] += src[oy * wo + ox];
            }
          }
        }
      }
    }
  }
  return gx;
}

void Conv2d::collect_parameters(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------- pooling

Tensor GlobalAvgPool::forward(const Tensor& x, Mode) {
  if (x.rank() < 3) throw std::invalid_argument("GlobalAvgPool: expected [C,B,...]");
  in_shape_ = x.shape();
  const std::size_t channels = x.dim(0), batch = x.dim(1);
  const std::size_t spatial = x.size() / (channels * batch);
  Tensor y({batch, channels});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t b = 0; b < batch; ++b) {
      const float* src = x.data() + (c * batch + b) * spatial;
      float acc = 0.0f;
      for (std::size_t s = 0; s < spatial; ++s) acc += src[s];
      y[b * channels + c] = acc / static_cast<float>(spatial);
    }
  }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& gy) {
  Tensor gx(in_shape_);
  const std::size_t channels = in_shape_[0], batch = in_shape_[1];
  const std::size_t spatial = gx.size() / (channels * batch);
  const float inv = 1.0f / static_cast<float>(spatial);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t b = 0; b < batch; ++b) {
      float* dst = gx.data() + (c * batch + b) * spatial;
      std::fill(dst, dst + spatial, gy[b * channels + c] * inv);
    }
  }
  return gx;
}

// ---------------------------------------------------------------- containers

Layer& Sequential::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return *layers_.back();
}

Tensor Sequential::forward(const Tensor& x, Mode mode) {
  Tensor h = x;
  for (auto& layer : layers_) h = layer->forward(h, mode);
  return h;
}

Tensor Sequential::backward(const Tensor& gy) {
  Tensor g = gy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::collect_parameters(std::vector<Param*>& out) {
  for (auto& layer : layers_) layer->collect_parameters(out);
}

Tensor Residual::forward(const Tensor& x, Mode mode) {
  Tensor h = body_->forward(x, mode);
  const Tensor skip = shortcut_ ? shortcut_->forward(x, mode) : x;
  if (skip.shape() != h.shape())
    throw std::invalid_argument("Residual: branch shapes differ " + shape_string(h.shape()) +
                                " vs " + shape_string(skip.shape()));
  simd::kernels().axpy(1.0f, skip.data(), h.data(), h.size());
  sum_ = h;
  Tensor y(h.shape());
  simd::kernels().relu_forward(h.data(), y.data(), h.size());
  return y;
}

Tensor Residual::backward(const Tensor& gy) {
  Tensor gz(sum_.shape());
  simd::kernels().relu_backward(sum_.data(), gy.data(), gz.data(), gz.size());
  Tensor gx = body_->backward(gz);
  if (shortcut_) {
    const Tensor gs = shortcut_->backward(gz);
    simd::kernels().axpy(1.0f, gs.data(), gx.data(), gx.size());
  } else {
    simd::kernels().axpy(1.0f, gz.data(), gx.data(), gx.size());
  }
  return gx;
}

void Residual::collect_parameters(std::vector<Param*>& out) {
  body_->collect_parameters(out);
  if (shortcut_) shortcut_->collect_parameters(out);
}

}  // namespace sigcl::nn

namespace sigcl::nn {

// ---------------------------------------------------------------- batch norm

BatchNorm::BatchNorm(std::size_t channels, const std::string& name, float momentum, float eps)
    : channels_(channels), momentum_(momentum), eps_(eps), gamma_(name + ".gamma", {channels}),
      beta_(name + ".beta", {channels}), running_mean_(name + ".running_mean", {channels}),
      running_var_(name + ".running_var", {channels}) {
  std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0f);
  std::fill(running_var_.value.begin(), running_var_.value.end(), 1.0f);
  running_mean_.buffer = running_var_.buffer = true;
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
  if (x.rank() < 2 || x.dim(0) != channels_)
    throw std::invalid_argument("BatchNorm: expected [" + std::to_string(channels_) + ",B,...], got " + shape_string(x.shape()));
  const std::size_t per = x.size() / channels_;
  mode_ = mode;
  xhat_ = Tensor(x.shape());
  inv_std_.assign(channels_, 0.0f);
  Tensor y(x.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    const float* src = x.data() + c * per;
    double mean, var;
    if (mode == Mode::train) {
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < per; ++i) s += src[i];
      mean = s / static_cast<double>(per);
      for (std::size_t i = 0; i < per; ++i) s2 += (src[i] - mean) * (src[i] - mean);
      var = s2 / static_cast<double>(per);
      const double unbiased = per > 1 ? s2 / static_cast<double>(per - 1) : var;
      running_mean_.value[c] = static_cast<float>((1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean);
      running_var_.value[c] = static_cast<float>((1.0 - momentum_) * running_var_.value[c] + momentum_ * unbiased);
    } else {
      mean = running_mean_.value[c];
      var = running_var_.value[c];
    }
    const float inv = static_cast<float>(1.0 / std::sqrt(var + eps_));
    inv_std_[c] = inv;
    const float m = static_cast<float>(mean), g = gamma_.value[c], b = beta_.value[c];
    float* xh = xhat_.data() + c * per;
    float* dst = y.data() + c * per;
    for (std::size_t i = 0; i < per; ++i) {
      xh[i] = (src[i] - m) * inv;
      dst[i] = g * xh[i] + b;
    }
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& gy) {
  const std::size_t per = gy.size() / channels_;
  Tensor gx(gy.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    const float* g = gy.data() + c * per;
    const float* xh = xhat_.data() + c * per;
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t i = 0; i < per; ++i) {
      sum_g += g[i];
      sum_gx += static_cast<double>(g[i]) * xh[i];
    }
    gamma_.grad[c] += static_cast<float>(sum_gx);
    beta_.grad[c] += static_cast<float>(sum_g);
    const float scale = gamma_.value[c] * inv_std_[c];
    float* dst = gx.data() + c * per;
    if (mode_ == Mode::train) {
      const double inv_n = 1.0 / static_cast<double>(per);
      for (std::size_t i = 0; i < per; ++i)
        dst[i] = static_cast<float>(scale * (g[i] - inv_n * sum_g - xh[i] * inv_n * sum_gx));
    } else {
      for (std::size_t i = 0; i < per; ++i) dst[i] = scale * g[i];
    }
  }
  return gx;
}

void BatchNorm::collect_parameters(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

}  // namespace sigcl::nn
