#include "sigcl/sac.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sigcl/errors.hpp"
#include "sigcl/simd/kernels.hpp"

namespace sigcl::sac {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

Mlp make_policy(const SacConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = make_rng(seed, 0x501);
  return Mlp(cfg.state_dim, cfg.hidden, 2 * kActionDim, rng, "policy");
}

void copy_values(const std::vector<nn::Param*>& from, const std::vector<nn::Param*>& to) {
  for (std::size_t i = 0; i < from.size(); ++i) to[i]->value = from[i]->value;
}

}  // namespace

void SacConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidArgument("SacConfig: gamma must lie in [0, 1)");
  if (!(entropy_alpha >= 0.0)) throw InvalidArgument("SacConfig: entropy_alpha must be non-negative");
  if (!(polyak > 0.0 && polyak < 1.0)) throw InvalidArgument("SacConfig: polyak must lie in (0, 1)");
  if (!(lr > 0.0)) throw InvalidArgument("SacConfig: lr must be positive");
  if (buffer_capacity < 1 || batch < 1 || updates_per_step < 1 || state_dim < 1)
    throw InvalidArgument("SacConfig: counts must be at least 1");
  if (hidden.empty() || std::find(hidden.begin(), hidden.end(), 0u) != hidden.end())
    throw InvalidArgument("SacConfig: hidden widths must be positive");
  if (!(log_std_min < log_std_max)) throw InvalidArgument("SacConfig: empty log-std range");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InvalidArgument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::store(Transition t) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(t));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw InvalidArgument("ReplayBuffer::sample: buffer is empty");
  std::vector<Transition> out;
  out.reserve(n);
  if (n <= items_.size()) {
    std::vector<std::size_t> idx(items_.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + uniform_index(rng, idx.size() - i);
      std::swap(idx[i], idx[j]);
      out.push_back(items_[idx[i]]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out.push_back(items_[uniform_index(rng, items_.size())]);
  }
  return out;
}

Mlp::Mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng,
         const std::string& name) {
  std::size_t width = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    net_.emplace<nn::Linear>(width, hidden[i], rng, name + ".fc" + std::to_string(i));
    net_.emplace<nn::Relu>();
    width = hidden[i];
  }
  net_.emplace<nn::Linear>(width, out, rng, name + ".out");
}

std::vector<nn::Param*> Mlp::parameters() {
  std::vector<nn::Param*> out;
  net_.collect_parameters(out);
  return out;
}

Tensor states_tensor(std::span<const std::vector<double>> states, std::size_t dim) {
  Tensor t({states.size(), dim});
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].size() != dim)
      throw InvalidArgument("state width " + std::to_string(states[i].size()) + ", expected " + std::to_string(dim));
    for (std::size_t k = 0; k < dim; ++k) {
      if (!std::isfinite(states[i][k])) throw InvalidArgument("state contains a non-finite value");
      t[i * dim + k] = static_cast<float>(states[i][k]);
    }
  }
  return t;
}

Agent::Agent(const SacConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), policy_(make_policy(cfg, seed)),
      policy_opt_(policy_.parameters(), static_cast<float>(cfg.lr)) {
  for (std::size_t i = 0; i < 2; ++i) {
    Rng rng = make_rng(seed, 0x510 + i);
    q_.emplace_back(cfg.state_dim + kActionDim, cfg.hidden, 1, rng, "q" + std::to_string(i + 1));
    Rng rng_t = make_rng(seed, 0x510 + i);
    q_target_.emplace_back(cfg.state_dim + kActionDim, cfg.hidden, 1, rng_t, "q" + std::to_string(i + 1) + "_target");
    copy_values(q_.back().parameters(), q_target_.back().parameters());
  }
  for (auto& q : q_) q_opt_.emplace_back(q.parameters(), static_cast<float>(cfg.lr));
}

Agent::PolicySample Agent::sample_policy(const Tensor& states, Rng& rng, bool deterministic) {
  const std::size_t n = states.dim(0);
  const Tensor out = policy_.forward(states);
  PolicySample s{Tensor({n, kActionDim}), Tensor({n, kActionDim}), Tensor({n, kActionDim}),
                 Tensor({n, kActionDim}), Tensor({n, kActionDim}), std::vector<double>(n, 0.0)};
  const double lo = cfg_.log_std_min, hi = cfg_.log_std_max;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < kActionDim; ++d) {
      const double mu = out[i * 2 * kActionDim + d];
      const double raw = out[i * 2 * kActionDim + kActionDim + d];
      const double log_std = lo + 0.5 * (hi - lo) * (std::tanh(raw) + 1.0);
      const double eps = deterministic ? 0.0 : standard_normal(rng);
      const double u = mu + std::exp(log_std) * eps;
      const double a = 1.0 / (1.0 + std::exp(-u));
      const std::size_t k = i * kActionDim + d;
      s.u[k] = static_cast<float>(u);
      s.a[k] = static_cast<float>(a);
      s.eps[k] = static_cast<float>(eps);
      s.log_std[k] = static_cast<float>(log_std);
      s.raw_std[k] = static_cast<float>(raw);
      // log N(u; mu, sigma) - log(a (1 - a)), the latter written via softplus.
      s.log_prob[i] += -0.5 * eps * eps - log_std - kHalfLog2Pi + softplus(-u) + softplus(u);
    }
  }
  return s;
}

Tensor Agent::q_forward(Mlp& q, const Tensor& states, const Tensor& actions) {
  const std::size_t n = states.dim(0), sd = states.dim(1);
  Tensor in({n, sd + kActionDim});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(states.data() + i * sd, sd, in.data() + i * (sd + kActionDim));
    std::copy_n(actions.data() + i * kActionDim, kActionDim, in.data() + i * (sd + kActionDim) + sd);
  }
  return q.forward(in);
}

Action Agent::select_action(std::span<const double> state, ActionMode mode, Rng& rng) {
  const std::vector<double> s(state.begin(), state.end());
  const Tensor st = states_tensor(std::span(&s, 1), cfg_.state_dim);
  const PolicySample ps = sample_policy(st, rng, mode == ActionMode::deterministic);
  Action a{};
  for (std::size_t d = 0; d < kActionDim; ++d) a[d] = std::clamp(static_cast<double>(ps.a[d]), 0.0, 1.0);
  return a;
}

double Agent::target_q(const Transition& t, Rng& rng) {
  if (t.done || cfg_.gamma == 0.0) return t.reward;
  const Tensor st = states_tensor(std::span(&t.next_state, 1), cfg_.state_dim);
  const PolicySample ps = sample_policy(st, rng, false);
  double q = q_forward(q_target_[0], st, ps.a)[0];
  if (!cfg_.single_q) q = std::min(q, static_cast<double>(q_forward(q_target_[1], st, ps.a)[0]));
  return t.reward + cfg_.gamma * (q - cfg_.entropy_alpha * ps.log_prob[0]);
}

Diagnostics Agent::update(std::span<const Transition> batch, Rng& rng, bool blend_targets) {
  if (batch.empty()) throw InvalidArgument("Agent::update: empty batch");
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<std::vector<double>> st, next;
  Tensor actions({n, kActionDim});
  for (std::size_t i = 0; i < n; ++i) {
    st.push_back(batch[i].state);
    next.push_back(batch[i].next_state);
    for (std::size_t d = 0; d < kActionDim; ++d) actions[i * kActionDim + d] = static_cast<float>(batch[i].action[d]);
  }
  const Tensor s = states_tensor(st, cfg_.state_dim);
  const Tensor s_next = states_tensor(next, cfg_.state_dim);

  // Critic targets.
  std::vector<double> y(n);
  {
    const PolicySample ps = sample_policy(s_next, rng, false);
    const Tensor q1 = q_forward(q_target_[0], s_next, ps.a);
    const Tensor q2 = cfg_.single_q ? q1 : q_forward(q_target_[1], s_next, ps.a);
    for (std::size_t i = 0; i < n; ++i) {
      const double boot = std::min<double>(q1[i], q2[i]) - cfg_.entropy_alpha * ps.log_prob[i];
      y[i] = batch[i].reward + (batch[i].done ? 0.0 : cfg_.gamma * boot);
    }
  }

  Diagnostics diag;
  for (std::size_t c = 0; c < critic_count(); ++c) {
    q_opt_[c].zero_grad();
    const Tensor pred = q_forward(q_[c], s, actions);
    Tensor g({n, 1});
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = pred[i] - y[i];
      loss += e * e * inv_n;
      g[i] = static_cast<float>(2.0 * e * inv_n);
    }
    q_[c].backward(g);
    q_opt_[c].step();
    diag.q_loss += loss / static_cast<double>(critic_count());
  }

  // Actor: minimize alpha * log pi(a|s) - min_c Q_c(s, a) with a reparameterized.
  policy_opt_.zero_grad();
  const PolicySample ps = sample_policy(s, rng, false);
  std::vector<Tensor> qs;
  for (std::size_t c = 0; c < critic_count(); ++c) qs.push_back(q_forward(q_[c], s, ps.a));
  std::vector<double> dq_da(n * kActionDim, 0.0);
  const std::size_t in_w = cfg_.state_dim + kActionDim;
  for (std::size_t c = 0; c < critic_count(); ++c) {
    Tensor sel({n, 1});
    for (std::size_t i = 0; i < n; ++i) {
      const bool is_min = critic_count() == 1 || (c == 0 ? qs[0][i] <= qs[1][i] : qs[1][i] < qs[0][i]);
      sel[i] = is_min ? 1.0f : 0.0f;
    }
    const Tensor gin = q_[c].backward(sel);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < kActionDim; ++d) dq_da[i * kActionDim + d] += gin[i * in_w + cfg_.state_dim + d];
    q_opt_[c].zero_grad();
  }
  Tensor gout({n, 2 * kActionDim});
  const double alpha = cfg_.entropy_alpha;
  const double lo = cfg_.log_std_min, hi = cfg_.log_std_max;
  for (std::size_t i = 0; i < n; ++i) {
    double qmin = qs[0][i];
    if (critic_count() == 2) qmin = std::min<double>(qmin, qs[1][i]);
    diag.policy_loss += inv_n * (alpha * ps.log_prob[i] - qmin);
    diag.entropy -= inv_n * ps.log_prob[i];
    for (std::size_t d = 0; d < kActionDim; ++d) {
      const std::size_t k = i * kActionDim + d;
      const double a = ps.a[k];
      const double g_u = inv_n * (alpha * (2.0 * a - 1.0) - dq_da[k] * a * (1.0 - a));
      const double sigma = std::exp(static_cast<double>(ps.log_std[k]));
      const double g_log_std = g_u * sigma * ps.eps[k] - alpha * inv_n;
      const double t = std::tanh(static_cast<double>(ps.raw_std[k]));
      gout[i * 2 * kActionDim + d] = static_cast<float>(g_u);
      gout[i * 2 * kActionDim + kActionDim + d] = static_cast<float>(g_log_std * 0.5 * (hi - lo) * (1.0 - t * t));
    }
  }
  policy_.backward(gout);
  policy_opt_.step();

  if (blend_targets) {
    const auto& k = simd::kernels();
    const float keep = static_cast<float>(cfg_.polyak);
    const float take = static_cast<float>(1.0 - cfg_.polyak);
    for (std::size_t c = 0; c < 2; ++c) {
      const auto online = q_[c].parameters();
      const auto target = q_target_[c].parameters();
      for (std::size_t p = 0; p < online.size(); ++p)
        k.blend(keep, target[p]->value.data(), take, online[p]->value.data(), online[p]->size());
    }
  }
  return diag;
}

Diagnostics Agent::train(const ReplayBuffer& buffer, Rng& rng) {
  Diagnostics last;
  const std::size_t n = std::min(cfg_.batch, buffer.size());
  for (std::size_t u = 0; u < cfg_.updates_per_step; ++u) {
    const auto batch = buffer.sample(n, rng);
    last = update(batch, rng);
  }
  return last;
}

std::vector<checkpoint::ModuleRef> Agent::modules() {
  nlohmann::json spec = {{"state_dim", cfg_.state_dim}, {"action_dim", kActionDim}, {"hidden", cfg_.hidden}};
  std::vector<checkpoint::ModuleRef> out{{"policy", spec, policy_.parameters()}};
  for (std::size_t c = 0; c < 2; ++c) {
    out.push_back({"q" + std::to_string(c + 1), spec, q_[c].parameters()});
    out.push_back({"q" + std::to_string(c + 1) + "_target", spec, q_target_[c].parameters()});
  }
  return out;
}

}  // namespace sigcl::sac
