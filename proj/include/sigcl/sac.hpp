#pragma once

// Soft actor-critic over a continuous action box [0, 1]^5: sigmoid-squashed
// Gaussian policy, twin Q networks with polyak-averaged targets, fixed
// entropy coefficient, ring replay buffer.

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "sigcl/checkpoint.hpp"
#include "sigcl/nn/layers.hpp"
#include "sigcl/nn/optim.hpp"
#include "sigcl/rng.hpp"

namespace sigcl::sac {

constexpr std::size_t kActionDim = 5;
constexpr std::size_t kDefaultStateDim = 384;
using Action = std::array<double, kActionDim>;

struct Transition {
  std::vector<double> state;
  Action action{};
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
};

struct SacConfig {
  double gamma = 0.9;
  double entropy_alpha = 0.2;
  double polyak = 0.995;
  double lr = 3e-4;
  std::size_t buffer_capacity = 256;
  std::size_t batch = 8;
  std::size_t updates_per_step = 10;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t state_dim = kDefaultStateDim;
  // Literal single-critic backup instead of the twin minimum.
  bool single_q = false;
  double log_std_min = -5.0;
  double log_std_max = 2.0;

  void validate() const;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);
  void store(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }  // 0 = oldest
  // Without replacement when n <= size, uniform with replacement otherwise.
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Transition> items_;
};

enum class ActionMode { stochastic, deterministic };

struct Diagnostics {
  double q_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;  // -mean log pi over the policy batch
};

// Plain ReLU multilayer perceptron.
class Mlp {
 public:
  Mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng,
      const std::string& name);
  Tensor forward(const Tensor& x) { return net_.forward(x, nn::Mode::train); }
  Tensor backward(const Tensor& g) { return net_.backward(g); }
  std::vector<nn::Param*> parameters();

 private:
  nn::Sequential net_;
};

class Agent {
 public:
  Agent(const SacConfig& cfg, std::uint64_t seed);

  Action select_action(std::span<const double> state, ActionMode mode, Rng& rng);
  // r + gamma * (min target Q(s', a') - alpha * log pi(a'|s')) with a' ~ pi(s');
  // just r when done.
  double target_q(const Transition& t, Rng& rng);
  // One critic step, one actor step, then (optionally) the target blend.
  Diagnostics update(std::span<const Transition> batch, Rng& rng, bool blend_targets = true);
  // updates_per_step rounds of sample + update; returns the last diagnostics.
  Diagnostics train(const ReplayBuffer& buffer, Rng& rng);

  const SacConfig& config() const { return cfg_; }
  std::vector<nn::Param*> policy_parameters() { return policy_.parameters(); }
  std::vector<nn::Param*> q_parameters(std::size_t i) { return q_.at(i).parameters(); }
  std::vector<nn::Param*> target_parameters(std::size_t i) { return q_target_.at(i).parameters(); }
  std::vector<checkpoint::ModuleRef> modules();

 private:
  struct PolicySample {
    Tensor u;        // pre-squash sample [n, 5]
    Tensor a;        // squashed action
    Tensor eps;      // standard normal draw
    Tensor log_std;  // clamped log standard deviation
    Tensor raw_std;  // network output before clamping
    std::vector<double> log_prob;
  };
  PolicySample sample_policy(const Tensor& states, Rng& rng, bool deterministic);
  Tensor q_forward(Mlp& q, const Tensor& states, const Tensor& actions);
  std::size_t critic_count() const { return cfg_.single_q ? 1 : 2; }

  SacConfig cfg_;
  Mlp policy_;
  std::vector<Mlp> q_;
  std::vector<Mlp> q_target_;
  nn::Adam policy_opt_;
  std::vector<nn::Adam> q_opt_;
};

Tensor states_tensor(std::span<const std::vector<double>> states, std::size_t dim);

}  // namespace sigcl::sac
