#pragma once

// Fusion of per-domain features, domain-level attention and the small
// classifier trained during few-shot fine-tuning.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigcl/checkpoint.hpp"
#include "sigcl/matrix.hpp"
#include "sigcl/nn/layers.hpp"

namespace sigcl::heads {

enum class FusionMode { concat, add, dot };
const char* fusion_mode_name(FusionMode m);
FusionMode parse_fusion_mode(const std::string& s);

struct FusionConfig {
  FusionMode mode = FusionMode::concat;
  bool use_attention = true;
  bool use_classifier_head = true;
  double dropout_rate = 0.5;
  std::size_t num_classes = 0;
  std::size_t hidden = 128;

  void validate() const;
  nlohmann::json to_json() const;
};

// concat: [B, sum widths] in argument order. add/dot: elementwise over equal widths.
Tensor fuse(std::span<const Tensor> parts, FusionMode mode);
// Splits a fused gradient back into per-part gradients given the forward inputs.
std::vector<Tensor> fuse_backward(std::span<const Tensor> parts, FusionMode mode, const Tensor& grad);

// Affine map to one logit per block, softmax over blocks, then block d is
// scaled by blocks * w_d, so equal logits give the identity.
class DomainAttention final : public nn::Layer {
 public:
  DomainAttention(std::size_t blocks, std::size_t block_width, Rng& rng);
  Tensor forward(const Tensor& x, nn::Mode mode) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_parameters(std::vector<nn::Param*>& out) override;

  // Softmax weights from the last forward, [B, blocks].
  const Tensor& weights() const { return weights_; }
  nn::Linear& scorer() { return scorer_; }

 private:
  std::size_t blocks_, block_width_;
  nn::Linear scorer_;
  Tensor input_;
  Tensor weights_;
};

// Attention (optional) followed by the classifier on a fused batch.
class FusionHead {
 public:
  FusionHead(const FusionConfig& cfg, std::size_t blocks, std::size_t block_width, std::uint64_t seed);

  Tensor forward(const Tensor& fused, nn::Mode mode);  // -> [B, num_classes]
  Tensor backward(const Tensor& grad_logits);
  std::vector<nn::Param*> parameters();
  checkpoint::ModuleRef module();

  std::size_t input_width() const { return in_width_; }
  DomainAttention* attention() { return attention_.get(); }
  const FusionConfig& config() const { return cfg_; }

 private:
  FusionConfig cfg_;
  std::size_t blocks_;
  std::size_t in_width_;
  std::unique_ptr<DomainAttention> attention_;
  nn::Sequential classifier_;
};

struct CrossEntropy {
  double value = 0.0;
  Mat grad;  // d mean-loss / d logits
};

CrossEntropy cross_entropy(const Mat& logits, std::span<const std::size_t> labels);

// Row-wise argmax.
std::vector<std::size_t> predict(const Tensor& logits);

}  // namespace sigcl::heads
