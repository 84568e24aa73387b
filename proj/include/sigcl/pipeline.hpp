#pragma once

// Reinforcement-learned contrastive pretraining, few-shot fine-tuning of the
// fusion head with frozen encoders, and frozen evaluation.

#include <array>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sigcl/augment.hpp"
#include "sigcl/clustering.hpp"
#include "sigcl/conloss.hpp"
#include "sigcl/domains.hpp"
#include "sigcl/encoders.hpp"
#include "sigcl/heads.hpp"
#include "sigcl/nn/optim.hpp"
#include "sigcl/sac.hpp"
#include "sigcl/sigdata.hpp"

namespace sigcl::pipeline {

using DomainMask = std::array<bool, domains::kNumDomains>;

struct RunConfig {
  std::uint64_t seed = 0;
  double lr = 1e-3;
  std::size_t e_cl = 30;
  std::size_t e_rl = 10;
  std::size_t finetune_epochs = 10;
  std::size_t batch_size = 64;
  std::size_t finetune_batch_size = 5;
  std::size_t shots = 5;
  double base_fraction = 0.9;
  std::size_t probe_batch_size = 256;

  conloss::LossConfig loss{};
  augment::AugRanges aug{};
  augment::AugMask aug_enabled = augment::kAllAugs;
  DomainMask domains{true, true, true};
  bool rl = true;
  double fixed_action = 0.5;  // every component when rl is off
  sac::SacConfig sac{};
  heads::FusionConfig fusion{};
  std::array<encoders::EncoderSpec, domains::kNumDomains> encoder{
      encoders::EncoderSpec{encoders::EncoderKind::res1d, 2},
      encoders::EncoderSpec{encoders::EncoderKind::res1d, 2},
      encoders::EncoderSpec{encoders::EncoderKind::cnn2d, 1, 16}};
  encoders::ProjectionSpec projection{};
  domains::ConstellationSpec constellation{};
  domains::FreqRepr freq_repr = domains::FreqRepr::magphase;
  std::size_t kmeans_restarts = 5;
  std::size_t kmeans_max_iters = 100;

  void validate() const;
};

// Encoders and projection heads of the enabled domains.
class Model {
 public:
  Model(const RunConfig& cfg, std::uint64_t seed);

  bool enabled(std::size_t d) const { return static_cast<bool>(encoder_[d]); }
  encoders::Encoder& encoder(std::size_t d) { return *encoder_.at(d); }
  encoders::ProjectionHead& projection(std::size_t d) { return *projection_.at(d); }
  std::size_t domain_count() const;

  std::vector<nn::Param*> parameters();
  std::vector<nn::Param*> encoder_parameters();
  std::vector<checkpoint::ModuleRef> modules();
  void set_encoders_frozen(bool frozen);

  std::vector<std::vector<float>> snapshot();
  void restore(const std::vector<std::vector<float>>& values);

 private:
  std::array<std::unique_ptr<encoders::Encoder>, domains::kNumDomains> encoder_;
  std::array<std::unique_ptr<encoders::ProjectionHead>, domains::kNumDomains> projection_;
};

// Triple fed to the encoders: frequency rows are rescaled to O(1)
// (magnitude / sqrt(N), phase / pi).
domains::DomainTriple prepare_triple(const Tensor& iq, const RunConfig& cfg);
std::vector<domains::DomainTriple> prepare_triples(const sigdata::UnlabeledView& view,
                                                   std::span<const std::size_t> indices, const RunConfig& cfg);

// Stacks one domain of several triples into a sample-major batch.
Tensor domain_batch(std::span<const domains::DomainTriple> triples, std::size_t domain);

// Per-domain encoder features [B, 128] in eval mode; disabled domains empty.
std::array<Tensor, domains::kNumDomains> encode(Model& model, std::span<const domains::DomainTriple> triples,
                                                std::size_t chunk = 256);
// Enabled-domain features fused as for classification (T, F, C order).
Tensor embed(Model& model, std::span<const domains::DomainTriple> triples, heads::FusionMode mode);

// One JSON object per event, optionally mirrored to a metrics.jsonl file.
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(std::filesystem::path file, bool append = false);
  void set_run_id(std::string id) { run_id_ = std::move(id); }
  const std::string& run_id() const { return run_id_; }
  void emit(nlohmann::json event);
  const std::vector<nlohmann::json>& events() const { return events_; }
  // Events with wall-clock fields removed.
  std::vector<nlohmann::json> stable_events() const;

 private:
  std::optional<std::filesystem::path> file_;
  std::string run_id_ = "run";
  std::vector<nlohmann::json> events_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct RoundResult {
  std::vector<double> epoch_loss;
  std::map<std::string, double> breakdown;  // last-epoch means
};

// e_cl epochs of contrastive training on the base frames under one action.
RoundResult contrastive_round(Model& model, nn::Adam& opt, std::span<const domains::DomainTriple> base,
                              const augment::AugAction& action, const RunConfig& cfg, Rng& rng,
                              MetricsLog* log = nullptr, std::size_t rl_step = 0);

// Mean-pooled features of the probe frames, T | F | C (384 wide; zeros for
// disabled domains).
std::vector<double> compute_state(Model& model, std::span<const domains::DomainTriple> probe);

struct RewardResult {
  double reward = 0.0;
  double acc = 0.0;
};
RewardResult compute_reward(Model& model, std::span<const domains::DomainTriple> support,
                            std::span<const std::size_t> labels, std::size_t num_classes, double prev_acc,
                            const clustering::KMeansConfig& kcfg);

struct RlStep {
  std::size_t step = 0;
  augment::AugAction action;
  double reward = 0.0;
  double acc = 0.0;
  std::vector<double> epoch_loss;
  sac::Diagnostics agent;
  bool improved = false;
};

struct PretrainResult {
  std::vector<RlStep> trace;
  double best_acc = 0.0;
  std::size_t best_step = 0;
  std::optional<std::filesystem::path> checkpoint;
};

// Restores the best-accuracy parameters into `model` before returning. When
// `checkpoint_dir` is set, encoders are saved there whenever accuracy improves
// and the agent is saved next to it at the end.
PretrainResult pretrain(Model& model, const sigdata::UnlabeledView& base, const sigdata::Dataset& support,
                        const RunConfig& cfg, MetricsLog& log,
                        const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

struct FinetuneResult {
  std::unique_ptr<heads::FusionHead> head;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_acc;  // support accuracy after each epoch
  double initial_acc = 0.0;       // before the first step
};

FinetuneResult finetune(Model& model, const sigdata::Dataset& support, const RunConfig& cfg, MetricsLog& log);

struct EvalReport {
  double overall = 0.0;
  std::size_t count = 0;
  std::map<std::string, double> per_class;
  std::map<int, double> per_snr;
  std::map<int, std::size_t> per_snr_count;
  nlohmann::json to_json() const;
};

EvalReport evaluate(Model& model, heads::FusionHead& head, const sigdata::Dataset& query, const RunConfig& cfg);

// Whole protocol on in-memory data: split, pretrain, fine-tune, evaluate.
struct ExperimentResult {
  PretrainResult pretrain;
  FinetuneResult finetune;
  EvalReport eval;
};
ExperimentResult run_experiment(const sigdata::Dataset& train, const sigdata::Dataset& test, const RunConfig& cfg,
                                MetricsLog& log);

// Checkpoint helpers shared with the command-line tool.
void save_model(Model& model, const std::filesystem::path& dir, const RunConfig& cfg, const nlohmann::json& extra = {});
void load_model(Model& model, const std::filesystem::path& dir);

std::string make_run_id(const RunConfig& cfg);

}  // namespace sigcl::pipeline
