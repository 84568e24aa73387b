#pragma once

// Central-difference checks for layers with explicit backward passes.

#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "sigcl/nn/layers.hpp"
#include "sigcl/rng.hpp"

namespace testing {

using sigcl::Tensor;

inline Tensor random_tensor(std::vector<std::size_t> shape, sigcl::Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(scale * sigcl::standard_normal(rng));
  return t;
}

inline double weighted_sum(const Tensor& out, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += double(out[i]) * w[i];
  return s;
}

inline bool grad_close(double analytic, double numeric, double rel = 2e-2, double abs = 2e-3) {
  return std::fabs(analytic - numeric) <= abs + rel * std::max(std::fabs(analytic), std::fabs(numeric));
}

// Loss = sum(w * layer(x)). Checks d/dx and d/dparams at up to `probes` coordinates each.
inline void check_layer_gradients(sigcl::nn::Layer& layer, Tensor x, sigcl::nn::Mode mode, sigcl::Rng& rng,
                                  std::size_t probes = 12, float h = 1e-2f) {
  Tensor out = layer.forward(x, mode);
  const Tensor w = random_tensor(out.shape(), rng);
  std::vector<sigcl::nn::Param*> params;
  layer.collect_parameters(params);
  sigcl::nn::zero_grad(params);
  layer.forward(x, mode);
  const Tensor gx = layer.backward(w);
  std::vector<std::vector<float>> grads;
  for (auto* p : params) grads.push_back(p->grad);

  auto loss = [&] { return weighted_sum(layer.forward(x, mode), w); };
  for (std::size_t t = 0; t < std::min(probes, x.size()); ++t) {
    const std::size_t i = sigcl::uniform_index(rng, x.size());
    const float keep = x[i];
    x[i] = keep + h;
    const double lp = loss();
    x[i] = keep - h;
    const double lm = loss();
    x[i] = keep;
    const double fd = (lp - lm) / (2.0 * h);
    CHECK_MESSAGE(grad_close(gx[i], fd), "input ", i, ": analytic ", gx[i], " numeric ", fd);
  }
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = *params[pi];
    if (p.buffer) continue;
    for (std::size_t t = 0; t < std::min(probes, p.size()); ++t) {
      const std::size_t i = sigcl::uniform_index(rng, p.size());
      const float keep = p.value[i];
      p.value[i] = keep + h;
      const double lp = loss();
      p.value[i] = keep - h;
      const double lm = loss();
      p.value[i] = keep;
      const double fd = (lp - lm) / (2.0 * h);
      CHECK_MESSAGE(grad_close(grads[pi][i], fd), p.name, "[", i, "]: analytic ", grads[pi][i], " numeric ", fd);
    }
  }
}

}  // namespace testing
