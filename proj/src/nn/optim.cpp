#include "sigcl/nn/optim.hpp"

#include <cmath>

#include "sigcl/simd/kernels.hpp"

namespace sigcl::nn {

Adam::Adam(std::vector<Param*> params, float lr, float beta1, float beta2, float eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param* p : params_) {
    m_.emplace_back(p->size(), 0.0f);
    v_.emplace_back(p->size(), 0.0f);
  }
}

void Adam::step() {
  ++t_;
  simd::AdamStep s;
  s.lr = lr_;
  s.beta1 = beta1_;
  s.beta2 = beta2_;
  s.eps = eps_;
  s.bias_correction1 = 1.0f - static_cast<float>(std::pow(beta1_, static_cast<double>(t_)));
  s.bias_correction2 = 1.0f - static_cast<float>(std::pow(beta2_, static_cast<double>(t_)));
  const auto& k = simd::kernels();
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param* p = params_[i];
    if (p->frozen || p->buffer) continue;
    k.adam(p->value.data(), p->grad.data(), m_[i].data(), v_[i].data(), p->size(), s);
  }
}

}  // namespace sigcl::nn
