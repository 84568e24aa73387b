#pragma once

// Per-domain feature encoders (B x 128 outputs) and projection heads.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigcl/nn/layers.hpp"

namespace sigcl::encoders {

constexpr std::size_t kFeatureDim = 128;

enum class EncoderKind { res1d, cnn1d_plain, cnn2d };
const char* encoder_kind_name(EncoderKind k);
EncoderKind parse_encoder_kind(const std::string& s);

struct EncoderSpec {
  EncoderKind kind = EncoderKind::res1d;
  std::size_t in_channels = 2;
  std::size_t width = 32;
  std::size_t depth = 3;
  std::size_t out_dim = kFeatureDim;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderSpec from_json(const nlohmann::json& j);
  bool operator==(const EncoderSpec&) const = default;
};

struct ProjectionSpec {
  std::size_t in_dim = kFeatureDim;
  std::size_t hidden_dim = 128;
  std::size_t out_dim = 128;

  void validate() const;
  nlohmann::json to_json() const;
  static ProjectionSpec from_json(const nlohmann::json& j);
  bool operator==(const ProjectionSpec&) const = default;
};

// Batches are sample-major: [B, C, L] for 1-D kinds, [B, C, H, W] for cnn2d.
class Encoder {
 public:
  Encoder(const EncoderSpec& spec, std::uint64_t seed, std::string name);

  Tensor forward(const Tensor& batch, nn::Mode mode);
  // Gradient w.r.t. the last forward's output [B, out_dim]; returns the
  // gradient w.r.t. its input batch.
  Tensor backward(const Tensor& grad);

  std::vector<nn::Param*> parameters();
  void set_frozen(bool frozen);
  const EncoderSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }

 private:
  EncoderSpec spec_;
  std::string name_;
  nn::Sequential net_;
  std::vector<std::size_t> input_shape_;
};

class ProjectionHead {
 public:
  ProjectionHead(const ProjectionSpec& spec, std::uint64_t seed, std::string name);
  Tensor forward(const Tensor& features, nn::Mode mode);
  Tensor backward(const Tensor& grad);
  std::vector<nn::Param*> parameters();
  const ProjectionSpec& spec() const { return spec_; }
  const std::string& name() const { return name_; }

 private:
  ProjectionSpec spec_;
  std::string name_;
  nn::Sequential net_;
};

// [B, C, S...] <-> [C, B, S...]
Tensor to_channel_major(const Tensor& batch);
Tensor to_sample_major(const Tensor& batch);

}  // namespace sigcl::encoders
