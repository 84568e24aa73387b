#include "sigcl/heads.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sigcl/errors.hpp"

namespace sigcl::heads {

const char* fusion_mode_name(FusionMode m) {
  switch (m) {
    case FusionMode::concat: return "concat";
    case FusionMode::add: return "add";
    case FusionMode::dot: return "dot";
  }
  return "?";
}

FusionMode parse_fusion_mode(const std::string& s) {
  for (FusionMode m : {FusionMode::concat, FusionMode::add, FusionMode::dot})
    if (s == fusion_mode_name(m)) return m;
  throw InvalidArgument("unknown fusion mode '" + s + "' (expected concat, add or dot)");
}

void FusionConfig::validate() const {
  if (num_classes < 2) throw InvalidArgument("FusionConfig: num_classes must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidArgument("FusionConfig: dropout_rate must lie in [0, 1)");
  if (hidden < 1) throw InvalidArgument("FusionConfig: hidden must be positive");
}

nlohmann::json FusionConfig::to_json() const {
  return {{"mode", fusion_mode_name(mode)}, {"use_attention", use_attention},
          {"use_classifier_head", use_classifier_head}, {"dropout_rate", dropout_rate},
          {"num_classes", num_classes}, {"hidden", hidden}};
}

Tensor fuse(std::span<const Tensor> parts, FusionMode mode) {
  if (parts.empty()) throw InvalidArgument("fuse: no inputs");
  const std::size_t b = parts[0].dim(0);
  for (const Tensor& p : parts)
    if (p.rank() != 2 || p.dim(0) != b) throw InvalidArgument("fuse: inputs must be [B, d] with a shared B");
  if (mode == FusionMode::concat) {
    std::size_t total = 0;
    for (const Tensor& p : parts) total += p.dim(1);
    Tensor out({b, total});
    for (std::size_t i = 0; i < b; ++i) {
      std::size_t off = 0;
      for (const Tensor& p : parts) {
        std::copy_n(p.data() + i * p.dim(1), p.dim(1), out.data() + i * total + off);
        off += p.dim(1);
      }
    }
    return out;
  }
  const std::size_t w = parts[0].dim(1);
  for (const Tensor& p : parts)
    if (p.dim(1) != w) throw InvalidArgument("fuse: elementwise fusion needs equal widths, got " + shape_string(p.shape()));
  Tensor out = parts[0];
  for (std::size_t k = 1; k < parts.size(); ++k)
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (mode == FusionMode::add) out[i] += parts[k][i];
      else out[i] *= parts[k][i];
    }
  return out;
}

std::vector<Tensor> fuse_backward(std::span<const Tensor> parts, FusionMode mode, const Tensor& grad) {
  std::vector<Tensor> out;
  const std::size_t b = grad.dim(0);
  if (mode == FusionMode::concat) {
    std::size_t off = 0;
    for (const Tensor& p : parts) {
      Tensor g({b, p.dim(1)});
      for (std::size_t i = 0; i < b; ++i)
        std::copy_n(grad.data() + i * grad.dim(1) + off, p.dim(1), g.data() + i * p.dim(1));
      off += p.dim(1);
      out.push_back(std::move(g));
    }
    return out;
  }
  for (std::size_t k = 0; k < parts.size(); ++k) {
    Tensor g = grad;
    if (mode == FusionMode::dot)
      for (std::size_t j = 0; j < parts.size(); ++j)
        if (j != k)
          for (std::size_t i = 0; i < g.size(); ++i) g[i] *= parts[j][i];
    out.push_back(std::move(g));
  }
  return out;
}

DomainAttention::DomainAttention(std::size_t blocks, std::size_t block_width, Rng& rng)
    : blocks_(blocks), block_width_(block_width), scorer_(blocks * block_width, blocks, rng, "attention") {}

Tensor DomainAttention::forward(const Tensor& x, nn::Mode mode) {
  if (x.rank() != 2 || x.dim(1) != blocks_ * block_width_)
    throw InvalidArgument("attention: expected width " + std::to_string(blocks_ * block_width_) + ", got " +
                          shape_string(x.shape()));
  const std::size_t b = x.dim(0);
  const Tensor logits = scorer_.forward(x, mode);
  input_ = x;
  weights_ = Tensor({b, blocks_});
  Tensor y = x;
  for (std::size_t i = 0; i < b; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < blocks_; ++d) mx = std::max(mx, static_cast<double>(logits[i * blocks_ + d]));
    double z = 0.0;
    std::vector<double> e(blocks_);
    for (std::size_t d = 0; d < blocks_; ++d) z += e[d] = std::exp(logits[i * blocks_ + d] - mx);
    for (std::size_t d = 0; d < blocks_; ++d) {
      const double w = e[d] / z;
      weights_[i * blocks_ + d] = static_cast<float>(w);
      const float s = static_cast<float>(static_cast<double>(blocks_) * w);
      float* row = y.data() + i * x.dim(1) + d * block_width_;
      for (std::size_t k = 0; k < block_width_; ++k) row[k] *= s;
    }
  }
  return y;
}

Tensor DomainAttention::backward(const Tensor& grad_out) {
  const std::size_t b = input_.dim(0), width = input_.dim(1);
  const double nb = static_cast<double>(blocks_);
  Tensor gx({b, width});
  Tensor glogits({b, blocks_});
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<double> gw(blocks_, 0.0);
    double mean = 0.0;
    for (std::size_t d = 0; d < blocks_; ++d) {
      const double w = weights_[i * blocks_ + d];
      const std::size_t off = i * width + d * block_width_;
      double dotp = 0.0;
      for (std::size_t k = 0; k < block_width_; ++k) {
        dotp += static_cast<double>(grad_out[off + k]) * input_[off + k];
        gx[off + k] = static_cast<float>(nb * w * grad_out[off + k]);
      }
      gw[d] = nb * dotp;
      mean += w * gw[d];
    }
    for (std::size_t d = 0; d < blocks_; ++d)
      glogits[i * blocks_ + d] = static_cast<float>(weights_[i * blocks_ + d] * (gw[d] - mean));
  }
  const Tensor gscore = scorer_.backward(glogits);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gscore[i];
  return gx;
}

void DomainAttention::collect_parameters(std::vector<nn::Param*>& out) { scorer_.collect_parameters(out); }

FusionHead::FusionHead(const FusionConfig& cfg, std::size_t blocks, std::size_t block_width, std::uint64_t seed)
    : cfg_(cfg), blocks_(blocks) {
  cfg_.validate();
  if (blocks < 1 || block_width < 1) throw InvalidArgument("FusionHead: empty input layout");
  in_width_ = cfg.mode == FusionMode::concat ? blocks * block_width : block_width;
  Rng rng = make_rng(seed, 0x4EAD);
  // Attention weighs whole domain blocks, so it only exists for concatenation.
  if (cfg.use_attention && cfg.mode == FusionMode::concat)
    attention_ = std::make_unique<DomainAttention>(blocks, block_width, rng);
  if (cfg.use_classifier_head) {
    classifier_.emplace<nn::Linear>(in_width_, cfg.hidden, rng, "classifier.fc0");
    classifier_.emplace<nn::Relu>();
    classifier_.emplace<nn::Dropout>(static_cast<float>(cfg.dropout_rate), derive_seed(seed, 0xD0));
    classifier_.emplace<nn::Linear>(cfg.hidden, cfg.num_classes, rng, "classifier.out");
  } else {
    classifier_.emplace<nn::Linear>(in_width_, cfg.num_classes, rng, "classifier.affine");
  }
}

Tensor FusionHead::forward(const Tensor& fused, nn::Mode mode) {
  if (fused.rank() != 2 || fused.dim(1) != in_width_)
    throw InvalidArgument("FusionHead: expected width " + std::to_string(in_width_) + ", got " + shape_string(fused.shape()));
  return classifier_.forward(attention_ ? attention_->forward(fused, mode) : fused, mode);
}

Tensor FusionHead::backward(const Tensor& grad_logits) {
  Tensor g = classifier_.backward(grad_logits);
  return attention_ ? attention_->backward(g) : g;
}

std::vector<nn::Param*> FusionHead::parameters() {
  std::vector<nn::Param*> out;
  if (attention_) attention_->collect_parameters(out);
  classifier_.collect_parameters(out);
  return out;
}

checkpoint::ModuleRef FusionHead::module() {
  nlohmann::json spec = cfg_.to_json();
  spec["blocks"] = blocks_;
  spec["input_width"] = in_width_;
  return {"head", spec, parameters()};
}

CrossEntropy cross_entropy(const Mat& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows) throw InvalidArgument("cross_entropy: label count differs from batch size");
  if (logits.rows == 0) throw InvalidArgument("cross_entropy: empty batch");
  CrossEntropy out{0.0, Mat(logits.rows, logits.cols)};
  const double inv_b = 1.0 / static_cast<double>(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    if (labels[i] >= logits.cols)
      throw InvalidArgument("cross_entropy: label " + std::to_string(labels[i]) + " out of range");
    const double* row = logits.row(i);
    const double mx = *std::max_element(row, row + logits.cols);
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols; ++c) z += std::exp(row[c] - mx);
    const double log_z = mx + std::log(z);
    out.value += inv_b * (log_z - row[labels[i]]);
    for (std::size_t c = 0; c < logits.cols; ++c)
      out.grad(i, c) = inv_b * (std::exp(row[c] - log_z) - (c == labels[i] ? 1.0 : 0.0));
  }
  return out;
}

std::vector<std::size_t> predict(const Tensor& logits) {
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  std::vector<std::size_t> out(b);
  for (std::size_t i = 0; i < b; ++i) {
    const float* row = logits.data() + i * c;
    out[i] = static_cast<std::size_t>(std::max_element(row, row + c) - row);
  }
  return out;
}

}  // namespace sigcl::heads
