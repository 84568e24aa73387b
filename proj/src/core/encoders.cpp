#include "sigcl/encoders.hpp"

#include <algorithm>

#include "sigcl/errors.hpp"

namespace sigcl::encoders {

using nn::Conv1d;
using nn::Conv2d;
using nn::Relu;

const char* encoder_kind_name(EncoderKind k) {
  switch (k) {
    case EncoderKind::res1d: return "res1d";
    case EncoderKind::cnn1d_plain: return "cnn1d-plain";
    case EncoderKind::cnn2d: return "cnn2d";
  }
  return "?";
}

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "res1d") return EncoderKind::res1d;
  if (s == "cnn1d-plain" || s == "cnn1d_plain") return EncoderKind::cnn1d_plain;
  if (s == "cnn2d") return EncoderKind::cnn2d;
  throw InvalidArgument("unknown encoder kind '" + s + "' (expected res1d, cnn1d-plain, cnn2d)");
}

void EncoderSpec::validate() const {
  if (out_dim != kFeatureDim) throw InvalidArgument("EncoderSpec: out_dim must be 128");
  if (width == 0 || in_channels == 0) throw InvalidArgument("EncoderSpec: width and in_channels must be positive");
}

nlohmann::json EncoderSpec::to_json() const {
  return {{"kind", encoder_kind_name(kind)}, {"in_channels", in_channels}, {"width", width},
          {"depth", depth}, {"out_dim", out_dim}};
}

EncoderSpec EncoderSpec::from_json(const nlohmann::json& j) {
  EncoderSpec s;
  s.kind = parse_encoder_kind(j.at("kind").get<std::string>());
  s.in_channels = j.at("in_channels").get<std::size_t>();
  s.width = j.at("width").get<std::size_t>();
  s.depth = j.at("depth").get<std::size_t>();
  s.out_dim = j.at("out_dim").get<std::size_t>();
  return s;
}

void ProjectionSpec::validate() const {
  if (in_dim == 0 || hidden_dim == 0 || out_dim == 0) throw InvalidArgument("ProjectionSpec: dims must be positive");
}

nlohmann::json ProjectionSpec::to_json() const {
  return {{"in_dim", in_dim}, {"hidden_dim", hidden_dim}, {"out_dim", out_dim}};
}

ProjectionSpec ProjectionSpec::from_json(const nlohmann::json& j) {
  return {j.at("in_dim").get<std::size_t>(), j.at("hidden_dim").get<std::size_t>(),
          j.at("out_dim").get<std::size_t>()};
}

Tensor to_channel_major(const Tensor& batch) {
  if (batch.rank() < 2) throw InvalidArgument("to_channel_major: rank must be >= 2");
  const std::size_t b = batch.dim(0), c = batch.dim(1);
  const std::size_t inner = batch.size() / (b * c);
  std::vector<std::size_t> shape = batch.shape();
  std::swap(shape[0], shape[1]);
  Tensor out(shape);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      std::copy_n(batch.data() + (i * c + ch) * inner, inner, out.data() + (ch * b + i) * inner);
  return out;
}

Tensor to_sample_major(const Tensor& batch) { return to_channel_major(batch); }

namespace {

std::unique_ptr<nn::Layer> residual_1d(std::size_t w, Rng& rng, const std::string& name) {
  auto body = std::make_unique<nn::Sequential>();
  body->emplace<Conv1d>(w, w, 3, 2, 1, rng, name + ".conv1");
  body->emplace<nn::BatchNorm>(w, name + ".bn1");
  body->emplace<Relu>();
  body->emplace<Conv1d>(w, w, 3, 1, 1, rng, name + ".conv2");
  body->emplace<nn::BatchNorm>(w, name + ".bn2");
  auto skip = std::make_unique<nn::Sequential>();
  skip->emplace<Conv1d>(w, w, 1, 2, 0, rng, name + ".down");
  skip->emplace<nn::BatchNorm>(w, name + ".down_bn");
  return std::make_unique<nn::Residual>(std::move(body), std::move(skip));
}

std::unique_ptr<nn::Layer> residual_2d(std::size_t w, Rng& rng, const std::string& name) {
  auto body = std::make_unique<nn::Sequential>();
  body->emplace<Conv2d>(w, w, 3, 2, 1, rng, name + ".conv1");
  body->emplace<nn::BatchNorm>(w, name + ".bn1");
  body->emplace<Relu>();
  body->emplace<Conv2d>(w, w, 3, 1, 1, rng, name + ".conv2");
  body->emplace<nn::BatchNorm>(w, name + ".bn2");
  auto skip = std::make_unique<nn::Sequential>();
  skip->emplace<Conv2d>(w, w, 1, 2, 0, rng, name + ".down");
  skip->emplace<nn::BatchNorm>(w, name + ".down_bn");
  return std::make_unique<nn::Residual>(std::move(body), std::move(skip));
}

}  // namespace

Encoder::Encoder(const EncoderSpec& spec, std::uint64_t seed, std::string name)
    : spec_(spec), name_(std::move(name)) {
  spec_.validate();
  Rng rng = make_rng(seed, 0xE7C0DE);
  const std::size_t w = spec_.width;
  switch (spec_.kind) {
    case EncoderKind::res1d:
      net_.emplace<Conv1d>(spec_.in_channels, w, 7, 2, 3, rng, name_ + ".stem");
      net_.emplace<nn::BatchNorm>(w, name_ + ".stem_bn");
      net_.emplace<Relu>();
      for (std::size_t d = 0; d < spec_.depth; ++d)
        net_.add(residual_1d(w, rng, name_ + ".block" + std::to_string(d)));
      break;
    case EncoderKind::cnn1d_plain:
      net_.emplace<Conv1d>(spec_.in_channels, w, 7, 2, 3, rng, name_ + ".stem");
      net_.emplace<nn::BatchNorm>(w, name_ + ".stem_bn");
      net_.emplace<Relu>();
      for (std::size_t d = 0; d < spec_.depth; ++d) {
        const std::string b = name_ + ".block" + std::to_string(d);
        net_.emplace<Conv1d>(w, w, 3, 2, 1, rng, b + ".conv1");
        net_.emplace<nn::BatchNorm>(w, b + ".bn1");
        net_.emplace<Relu>();
        net_.emplace<Conv1d>(w, w, 3, 1, 1, rng, b + ".conv2");
        net_.emplace<nn::BatchNorm>(w, b + ".bn2");
        net_.emplace<Relu>();
      }
      break;
    case EncoderKind::cnn2d:
      net_.emplace<Conv2d>(spec_.in_channels, w, 3, 2, 1, rng, name_ + ".stem");
      net_.emplace<nn::BatchNorm>(w, name_ + ".stem_bn");
      net_.emplace<Relu>();
      for (std::size_t d = 0; d < spec_.depth; ++d)
        net_.add(residual_2d(w, rng, name_ + ".block" + std::to_string(d)));
      break;
  }
  net_.emplace<nn::GlobalAvgPool>();
  net_.emplace<nn::Linear>(w, spec_.out_dim, rng, name_ + ".fc");
}

Tensor Encoder::forward(const Tensor& batch, nn::Mode mode) {
  const std::size_t want_rank = spec_.kind == EncoderKind::cnn2d ? 4 : 3;
  if (batch.rank() != want_rank || batch.dim(1) != spec_.in_channels)
    throw InvalidArgument("Encoder '" + name_ + "': batch shape " + shape_string(batch.shape()) +
                          " does not match " + encoder_kind_name(spec_.kind) + " with " +
                          std::to_string(spec_.in_channels) + " input channels");
  input_shape_ = batch.shape();
  return net_.forward(to_channel_major(batch), mode);
}

Tensor Encoder::backward(const Tensor& grad) { return to_sample_major(net_.backward(grad)); }

std::vector<nn::Param*> Encoder::parameters() {
  std::vector<nn::Param*> out;
  net_.collect_parameters(out);
  return out;
}

void Encoder::set_frozen(bool frozen) {
  for (nn::Param* p : parameters()) p->frozen = frozen;
}

ProjectionHead::ProjectionHead(const ProjectionSpec& spec, std::uint64_t seed, std::string name)
    : spec_(spec), name_(std::move(name)) {
  spec_.validate();
  Rng rng = make_rng(seed, 0x9807);
  net_.emplace<nn::Linear>(spec_.in_dim, spec_.hidden_dim, rng, name_ + ".fc1");
  net_.emplace<nn::Relu>();
  net_.emplace<nn::Linear>(spec_.hidden_dim, spec_.out_dim, rng, name_ + ".fc2");
}

Tensor ProjectionHead::forward(const Tensor& features, nn::Mode mode) {
  if (features.rank() != 2 || features.dim(1) != spec_.in_dim)
    throw InvalidArgument("ProjectionHead '" + name_ + "': expected [B," + std::to_string(spec_.in_dim) +
                          "], got " + shape_string(features.shape()));
  return net_.forward(features, mode);
}

Tensor ProjectionHead::backward(const Tensor& grad) { return net_.backward(grad); }

std::vector<nn::Param*> ProjectionHead::parameters() {
  std::vector<nn::Param*> out;
  net_.collect_parameters(out);
  return out;
}

}  // namespace sigcl::encoders
