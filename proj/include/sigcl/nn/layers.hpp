#pragma once

// Minimal layer library with explicit forward/backward passes.
//
// Convolutional layers use a channel-major activation layout: 1-D tensors are
// [C, B, L] and 2-D tensors are [C, B, H, W]. Folding the batch into the
// spatial axis lets one GEMM cover the whole batch. Fully connected layers use
// the usual [B, features].
//
// Every backward() consumes the cache left by the immediately preceding
// forward() on the same layer, accumulates parameter gradients, and returns
// the gradient with respect to that forward's input.

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "sigcl/rng.hpp"
#include "sigcl/tensor.hpp"

namespace sigcl::nn {

enum class Mode { eval, train };

struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool frozen = false;
  // Running statistics: saved with the weights, never touched by optimizers.
  bool buffer = false;

  Param() = default;
  Param(std::string n, std::vector<std::size_t> s)
      : name(std::move(n)), shape(std::move(s)), value(Tensor::element_count(shape), 0.0f),
        grad(value.size(), 0.0f) {}
  std::size_t size() const { return value.size(); }
};

// PyTorch-style default initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform_fan_in(Param& p, std::size_t fan_in, Rng& rng);

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, Mode mode) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual void collect_parameters(std::vector<Param*>& out) { (void)out; }
};

class Linear final : public Layer {
 public:
  Linear(std::size_t in, std::size_t out, Rng& rng, const std::string& name);
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  Param& weight() { return weight_; }  // [in, out]
  Param& bias() { return bias_; }

 private:
  std::size_t in_;
  std::size_t out_;
  Param weight_;
  Param bias_;
  Tensor input_;
};

class Relu final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor input_;
};

// Inverted dropout; identity in eval mode.
class Dropout final : public Layer {
 public:
  Dropout(float p, std::uint64_t seed) : p_(p), rng_(make_rng(seed, 0xD50)) {}
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void reseed(std::uint64_t seed) { rng_ = make_rng(seed, 0xD50); }

 private:
  float p_;
  Rng rng_;
  std::vector<float> mask_;
};

class Conv1d final : public Layer {
 public:
  Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
         std::size_t pad, Rng& rng, const std::string& name);
  Tensor forward(const Tensor& x, Mode mode) override;  // [Cin, B, L] -> [Cout, B, Lout]
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;
  std::size_t output_length(std::size_t len) const { return (len + 2 * pad_ - kernel_) / stride_ + 1; }

 private:
  std::size_t in_ch_, out_ch_, kernel_, stride_, pad_;
  Param weight_;  // [Cout, Cin * K]
  Param bias_;
  std::vector<std::size_t> in_shape_;
  std::vector<float> col_;
};

class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
         std::size_t pad, Rng& rng, const std::string& name);
  Tensor forward(const Tensor& x, Mode mode) override;  // [Cin, B, H, W] -> [Cout, B, Ho, Wo]
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;
  std::size_t output_extent(std::size_t n) const { return (n + 2 * pad_ - kernel_) / stride_ + 1; }

 private:
  std::size_t in_ch_, out_ch_, kernel_, stride_, pad_;
  Param weight_;  // [Cout, Cin * K * K]
  Param bias_;
  std::vector<std::size_t> in_shape_;
  std::vector<float> col_;
};

// Per-channel batch normalization on channel-major [C, B, spatial...] tensors.
// Training mode normalizes with batch statistics and updates the running
// averages; eval mode uses the running averages and mutates nothing.
class BatchNorm final : public Layer {
 public:
  explicit BatchNorm(std::size_t channels, const std::string& name, float momentum = 0.1f, float eps = 1e-5f);
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;

 private:
  std::size_t channels_;
  float momentum_, eps_;
  Param gamma_, beta_, running_mean_, running_var_;
  Mode mode_ = Mode::eval;
  Tensor xhat_;
  std::vector<float> inv_std_;
};

// [C, B, spatial...] -> [B, C] by averaging over the spatial axes.
class GlobalAvgPool final : public Layer {
 public:
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<std::size_t> in_shape_;
};

class Sequential final : public Layer {
 public:
  Sequential() = default;
  Layer& add(std::unique_ptr<Layer> layer);
  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto owned = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *owned;
    layers_.push_back(std::move(owned));
    return ref;
  }
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// relu(body(x) + shortcut(x)); a null shortcut is the identity.
class Residual final : public Layer {
 public:
  Residual(std::unique_ptr<Layer> body, std::unique_ptr<Layer> shortcut)
      : body_(std::move(body)), shortcut_(std::move(shortcut)) {}
  Tensor forward(const Tensor& x, Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<Param*>& out) override;

 private:
  std::unique_ptr<Layer> body_;
  std::unique_ptr<Layer> shortcut_;
  Tensor sum_;
};

// out = a * b^T etc. on row-major matrices, routed through the active GEMM.
void matmul(const float* a, std::size_t a_rows, std::size_t a_cols, bool transpose_a,
            const float* b, std::size_t b_rows, std::size_t b_cols, bool transpose_b, float* out,
            bool accumulate);
void transpose(const float* in, std::size_t rows, std::size_t cols, float* out);

void zero_grad(const std::vector<Param*>& params);
std::size_t parameter_count(const std::vector<Param*>& params);

}  // namespace sigcl::nn
