#include "sigcl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "sigcl/config.hpp"
#include "sigcl/errors.hpp"

namespace sigcl::pipeline {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::string domain_suffix(std::size_t d) { return domains::domain_tag(static_cast<domains::Domain>(d)); }

const Tensor& view_of(const domains::DomainTriple& t, std::size_t d) {
  switch (d) {
    case 0: return t.time;
    case 1: return t.freq;
    default: return t.constellation;
  }
}

Mat rows_of(const Tensor& t, std::size_t begin, std::size_t count) {
  const std::size_t w = t.dim(1);
  Mat m(count, w);
  for (std::size_t i = 0; i < count * w; ++i) m.v[i] = t[begin * w + i];
  return m;
}

Tensor stack_grads(const Mat& a, const Mat& b) {
  Tensor out({a.rows + b.rows, a.cols});
  for (std::size_t i = 0; i < a.v.size(); ++i) out[i] = static_cast<float>(a.v[i]);
  for (std::size_t i = 0; i < b.v.size(); ++i) out[a.v.size() + i] = static_cast<float>(b.v[i]);
  return out;
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
  return idx;
}

std::vector<domains::DomainTriple> dataset_triples(const sigdata::Dataset& ds, const RunConfig& cfg) {
  std::vector<domains::DomainTriple> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(prepare_triple(ds.iq(i), cfg));
  return out;
}

std::vector<std::size_t> label_vector(const sigdata::Dataset& ds) {
  const auto raw = ds.labels();
  return {raw.begin(), raw.end()};
}

nlohmann::json action_json(const augment::AugAction& a) { return std::vector<double>(a.a.begin(), a.a.end()); }

double accuracy(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& truth) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return pred.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace

void RunConfig::validate() const {
  if (e_cl < 1 || e_rl < 1 || finetune_epochs < 1 || shots < 1 || probe_batch_size < 1 || finetune_batch_size < 1)
    throw InvalidArgument("RunConfig: epoch, shot and batch counts must be at least 1");
  if (batch_size < 2) throw InvalidArgument("RunConfig: batch_size must be at least 2 for the contrastive loss");
  if (!(lr > 0.0)) throw InvalidArgument("RunConfig: lr must be positive");
  if (!(base_fraction > 0.0 && base_fraction < 1.0)) throw InvalidArgument("RunConfig: base_fraction must lie in (0, 1)");
  if (!(fixed_action >= 0.0 && fixed_action <= 1.0)) throw InvalidArgument("RunConfig: fixed_action must lie in [0, 1]");
  if (std::none_of(domains.begin(), domains.end(), [](bool b) { return b; }))
    throw InvalidArgument("RunConfig: at least one domain must be enabled");
  if (kmeans_restarts < 1 || kmeans_max_iters < 1) throw InvalidArgument("RunConfig: k-means counts must be at least 1");
  loss.validate();
  aug.validate();
  sac.validate();
  constellation.validate();
  projection.validate();
  for (const auto& e : encoder) e.validate();
}

Model::Model(const RunConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  for (std::size_t d = 0; d < domains::kNumDomains; ++d) {
    if (!cfg.domains[d]) continue;
    encoder_[d] = std::make_unique<encoders::Encoder>(cfg.encoder[d], derive_seed(seed, 10 + d), "enc_" + domain_suffix(d));
    encoders::ProjectionSpec ps = cfg.projection;
    ps.in_dim = encoders::kFeatureDim;
    projection_[d] = std::make_unique<encoders::ProjectionHead>(ps, derive_seed(seed, 20 + d), "proj_" + domain_suffix(d));
  }
}

std::size_t Model::domain_count() const {
  std::size_t n = 0;
  for (const auto& e : encoder_) n += e != nullptr;
  return n;
}

std::vector<nn::Param*> Model::parameters() {
  std::vector<nn::Param*> out;
  for (std::size_t d = 0; d < domains::kNumDomains; ++d) {
    if (!enabled(d)) continue;
    for (auto* p : encoder_[d]->parameters()) out.push_back(p);
    for (auto* p : projection_[d]->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<nn::Param*> Model::encoder_parameters() {
  std::vector<nn::Param*> out;
  for (std::size_t d = 0; d < domains::kNumDomains; ++d)
    if (enabled(d))
      for (auto* p : encoder_[d]->parameters()) out.push_back(p);
  return out;
}

std::vector<checkpoint::ModuleRef> Model::modules() {
  std::vector<checkpoint::ModuleRef> out;
  for (std::size_t d = 0; d < domains::kNumDomains; ++d) {
    if (!enabled(d)) continue;
    out.push_back({encoder_[d]->name(), encoder_[d]->spec().to_json(), encoder_[d]->parameters()});
    out.push_back({projection_[d]->name(), projection_[d]->spec().to_json(), projection_[d]->parameters()});
  }
  return out;
}

void Model::set_encoders_frozen(bool frozen) {
  for (std::size_t d = 0; d < domains::kNumDomains; ++d) {
    if (!enabled(d)) continue;
    encoder_[d]->set_frozen(frozen);
    for (auto* p : projection_[d]->parameters()) p->frozen = frozen;
  }
}

std::vector<std::vector<float>> Model::snapshot() {
  std::vector<std::vector<float>> out;
  for (auto* p : parameters()) out.push_back(p->value);
  return out;
}

void Model::restore(const std::vector<std::vector<float>>& values) {
  const auto params = parameters();
  if (values.size() != params.size()) throw InvalidArgument("Model::restore: parameter count differs");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

domains::DomainTriple prepare_triple(const Tensor& iq, const RunConfig& cfg) {
  domains::DomainTriple t = domains::to_triple(iq, cfg.constellation, cfg.freq_repr);
  const std::size_t n = t.freq.dim(1);
  const float mag = static_cast<float>(1.0 / std::sqrt(static_cast<double>(n)));
  const float second = cfg.freq_repr == domains::FreqRepr::magphase ? static_cast<float>(1.0 / kPi) : mag;
  for (std::size_t k = 0; k < n; ++k) {
    t.freq[k] *= mag;
    t.freq[n + k] *= second;
  }
  return t;
}

std::vector<domains::DomainTriple> prepare_triples(const sigdata::UnlabeledView& view,
                                                   std::span<const std::size_t> indices, const RunConfig& cfg) {
  std::vector<domains::DomainTriple> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(prepare_triple(view.iq(i), cfg));
  return out;
}

Tensor domain_batch(std::span<const domains::DomainTriple> triples, std::size_t domain) {
  if (triples.empty()) throw InvalidArgument("domain_batch: no frames");
  const Tensor& first = view_of(triples[0], domain);
  std::vector<std::size_t> shape{triples.size()};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  Tensor out(shape);
  const std::size_t each = first.size();
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const Tensor& v = view_of(triples[i], domain);
    if (v.shape() != first.shape()) throw InvalidArgument("domain_batch: frames of different shapes");
    std::copy_n(v.data(), each, out.data() + i * each);
  }
  return out;
}

std::array<Tensor, domains::kNumDomains> encode(Model& model, std::span<const domains::DomainTriple> triples,
                                                std::size_t chunk) {
  if (triples.empty()) throw InvalidArgument("encode: no frames");
  std::array<Tensor, domains::kNumDomains> out;
  for (std::size_t d = 0; d < domains::kNumDomains; ++d) {
    if (!model.enabled(d)) continue;
    Tensor all({triples.size(), encoders::kFeatureDim});
    for (std::size_t start = 0; start < triples.size(); start += chunk) {
      const std::size_t count = std::min(chunk, triples.size() - start);
      const Tensor f = model.encoder(d).forward(domain_batch(triples.subspan(start, count), d), nn::Mode::eval);
      std::copy_n(f.data(), f.size(), all.data() + start * encoders::kFeatureDim);
    }
    out[d] = std::move(all);
  }
  return out;
}

Tensor embed(Model& model, std::span<const domains::DomainTriple> triples, heads::FusionMode mode) {
  auto feats = encode(model, triples);
  std::vector<Tensor> parts;
  for (auto& f : feats)
    if (!f.empty()) parts.push_back(std::move(f));
  return heads::fuse(parts, mode);
}

MetricsLog::MetricsLog(std::filesystem::path file, bool append) : file_(std::move(file)) {
  std::ofstream out(*file_, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open metrics file " + file_->string());
}

void MetricsLog::emit(nlohmann::json event) {
  nlohmann::json e = {{"run_id", run_id_}, {"stage", nullptr},  {"rl_step", nullptr},
                      {"epoch", nullptr},  {"loss", nullptr},   {"acc", nullptr},
                      {"action", nullptr}, {"reward", nullptr}, {"breakdown", nlohmann::json::object()}};
  e.update(event);
  e["wall_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  if (file_) {
    std::ofstream out(*file_, std::ios::app);
    out << e.dump() << '\n';
  }
  events_.push_back(std::move(e));
}

std::vector<nlohmann::json> MetricsLog::stable_events() const {
  std::vector<nlohmann::json> out = events_;
  for (auto& e : out) e.erase("wall_ms");
  return out;
}

RoundResult contrastive_round(Model& model, nn::Adam& opt, std::span<const domains::DomainTriple> base,
                              const augment::AugAction& action, const RunConfig& cfg, Rng& rng, MetricsLog* log,
                              std::size_t rl_step) {
  action.validate();
  if (base.size() < 2) throw InvalidArgument("contrastive_round: need at least 2 base frames");
  if (cfg.batch_size < 2) throw InvalidArgument("contrastive_round: batch size must be at least 2");
  const std::size_t b_max = std::min(cfg.batch_size, base.size());
  RoundResult result;
  for (std::size_t epoch = 0; epoch < cfg.e_cl; ++epoch) {
    const auto order = shuffled(base.size(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::map<std::string, double> parts;
    for (std::size_t start = 0; start + 2 <= base.size(); start += b_max) {
      const std::size_t b = std::min(b_max, base.size() - start);
      std::vector<domains::DomainTriple> views;
      views.reserve(2 * b);
      for (std::size_t i = 0; i < b; ++i) views.push_back(base[order[start + i]]);
      for (std::size_t i = 0; i < b; ++i)
        views.push_back(augment::augment_triple(views[i], action, cfg.aug, rng, cfg.aug_enabled));

      conloss::ViewSet vs;
      for (std::size_t d = 0; d < domains::kNumDomains; ++d) {
        vs.enabled[d] = model.enabled(d);
        if (!model.enabled(d)) continue;
        const Tensor f = model.encoder(d).forward(domain_batch(views, d), nn::Mode::train);
        const Tensor z = model.projection(d).forward(f, nn::Mode::train);
        vs.z[d][0] = rows_of(z, 0, b);
        vs.z[d][1] = rows_of(z, b, b);
      }
      const conloss::TotalLoss tl = conloss::total_loss(vs, cfg.loss);
      opt.zero_grad();
      for (std::size_t d = 0; d < domains::kNumDomains; ++d) {
        if (!model.enabled(d)) continue;
        const Tensor gf = model.projection(d).backward(stack_grads(tl.grad[d][0], tl.grad[d][1]));
        model.encoder(d).backward(gf);
      }
      opt.step();
      loss_sum += tl.value;
      for (const auto& [k, v] : tl.breakdown) parts[k] += v;
      ++batches;
    }
    const double mean = loss_sum / static_cast<double>(batches);
    for (auto& [k, v] : parts) v /= static_cast<double>(batches);
    result.epoch_loss.push_back(mean);
    result.breakdown = parts;
    if (log)
      log->emit({{"stage", "pretrain"}, {"rl_step", rl_step}, {"epoch", epoch + 1}, {"loss", mean},
                 {"action", action_json(action)}, {"breakdown", parts}});
  }
  return result;
}

std::vector<double> compute_state(Model& model, std::span<const domains::DomainTriple> probe) {
  if (probe.empty()) throw InvalidArgument("compute_state: empty probe set");
  const auto feats = encode(model, probe);
  std::vector<double> state(domains::kNumDomains * encoders::kFeatureDim, 0.0);
  for (std::size_t d = 0; d < domains::kNumDomains; ++d) {
    if (feats[d].empty()) continue;
    for (std::size_t i = 0; i < probe.size(); ++i)
      for (std::size_t k = 0; k < encoders::kFeatureDim; ++k)
        state[d * encoders::kFeatureDim + k] += feats[d][i * encoders::kFeatureDim + k];
    for (std::size_t k = 0; k < encoders::kFeatureDim; ++k)
      state[d * encoders::kFeatureDim + k] /= static_cast<double>(probe.size());
  }
  return state;
}

RewardResult compute_reward(Model& model, std::span<const domains::DomainTriple> support,
                            std::span<const std::size_t> labels, std::size_t num_classes, double prev_acc,
                            const clustering::KMeansConfig& kcfg) {
  if (support.size() != labels.size()) throw InvalidArgument("compute_reward: label count differs from support size");
  if (support.size() < num_classes)
    throw InvalidArgument("compute_reward: support has " + std::to_string(support.size()) + " frames for " +
                          std::to_string(num_classes) + " clusters");
  const Mat x = Mat::from_tensor(embed(model, support, heads::FusionMode::concat));
  clustering::KMeansConfig k = kcfg;
  k.k = num_classes;
  const auto fit = clustering::kmeans_fit(x, k);
  const double acc = clustering::cluster_accuracy(fit.assignments, labels, num_classes);
  return {clustering::reward(acc, prev_acc), acc};
}

void save_model(Model& model, const std::filesystem::path& dir, const RunConfig& cfg, const nlohmann::json& extra) {
  nlohmann::json e = extra.is_object() ? extra : nlohmann::json::object();
  e["config"] = config::to_json(cfg);
  checkpoint::save(dir, model.modules(), e);
}

void load_model(Model& model, const std::filesystem::path& dir) { checkpoint::load(dir, model.modules()); }

PretrainResult pretrain(Model& model, const sigdata::UnlabeledView& base, const sigdata::Dataset& support,
                        const RunConfig& cfg, MetricsLog& log, const std::optional<std::filesystem::path>& checkpoint_dir) {
  cfg.validate();
  if (base.size() < 2) throw InvalidArgument("pretrain: base set needs at least 2 frames");
  if (support.empty()) throw InvalidArgument("pretrain: empty support set");

  std::vector<std::size_t> all(base.size());
  std::iota(all.begin(), all.end(), 0);
  const auto base_triples = prepare_triples(base, all, cfg);
  Rng probe_rng = make_rng(cfg.seed, 0x9B0);
  auto probe_order = shuffled(base.size(), probe_rng);
  probe_order.resize(std::min(cfg.probe_batch_size, base.size()));
  std::vector<domains::DomainTriple> probe;
  for (std::size_t i : probe_order) probe.push_back(base_triples[i]);
  const auto support_triples = dataset_triples(support, cfg);
  const auto support_labels = label_vector(support);

  clustering::KMeansConfig kcfg;
  kcfg.k = support.num_classes();
  kcfg.restarts = cfg.kmeans_restarts;
  kcfg.max_iters = cfg.kmeans_max_iters;
  kcfg.seed = derive_seed(cfg.seed, 0xC1);

  nn::Adam opt(model.parameters(), static_cast<float>(cfg.lr));
  sac::SacConfig scfg = cfg.sac;
  scfg.state_dim = domains::kNumDomains * encoders::kFeatureDim;
  sac::Agent agent(scfg, derive_seed(cfg.seed, 0x5AC));
  sac::ReplayBuffer buffer(scfg.buffer_capacity);
  Rng train_rng = make_rng(cfg.seed, 0xA11);
  Rng agent_rng = make_rng(cfg.seed, 0xA6E);

  PretrainResult result;
  std::vector<double> state = compute_state(model, probe);
  double prev_acc = 0.0;
  auto best = model.snapshot();
  for (std::size_t t = 1; t <= cfg.e_rl; ++t) {
    RlStep step;
    step.step = t;
    if (!cfg.rl) step.action = augment::AugAction::constant(cfg.fixed_action);
    else if (t == 1) step.action = augment::AugAction::zero();
    else step.action.a = agent.select_action(state, sac::ActionMode::stochastic, agent_rng);

    step.epoch_loss = contrastive_round(model, opt, base_triples, step.action, cfg, train_rng, &log, t).epoch_loss;
    const RewardResult rr = compute_reward(model, support_triples, support_labels, support.num_classes(), prev_acc, kcfg);
    step.reward = rr.reward;
    step.acc = rr.acc;
    std::vector<double> next = compute_state(model, probe);
    if (cfg.rl) {
      buffer.store({state, step.action.a, rr.reward, next, t == cfg.e_rl});
      step.agent = agent.train(buffer, agent_rng);
    }
    if (rr.acc > result.best_acc) {
      step.improved = true;
      result.best_acc = rr.acc;
      result.best_step = t;
      best = model.snapshot();
      if (checkpoint_dir) {
        save_model(model, *checkpoint_dir / "pretrain", cfg, {{"acc", rr.acc}, {"rl_step", t}});
        result.checkpoint = *checkpoint_dir / "pretrain";
      }
    }
    log.emit({{"stage", "pretrain_rl"},
              {"rl_step", t},
              {"loss", step.epoch_loss.back()},
              {"acc", rr.acc},
              {"action", action_json(step.action)},
              {"reward", rr.reward},
              {"breakdown",
               {{"q_loss", step.agent.q_loss}, {"policy_loss", step.agent.policy_loss}, {"entropy", step.agent.entropy}}}});
    result.trace.push_back(std::move(step));
    prev_acc = rr.acc;
    state = std::move(next);
  }
  model.restore(best);
  if (checkpoint_dir && cfg.rl)
    checkpoint::save(*checkpoint_dir / "agent", agent.modules(), {{"best_acc", result.best_acc}});
  return result;
}

FinetuneResult finetune(Model& model, const sigdata::Dataset& support, const RunConfig& cfg, MetricsLog& log) {
  if (support.empty()) throw InvalidArgument("finetune: empty support set");
  model.set_encoders_frozen(true);
  const auto triples = dataset_triples(support, cfg);
  const Tensor feats = embed(model, triples, cfg.fusion.mode);
  const auto labels = label_vector(support);

  heads::FusionConfig fcfg = cfg.fusion;
  fcfg.num_classes = support.num_classes();
  FinetuneResult result;
  result.head = std::make_unique<heads::FusionHead>(fcfg, model.domain_count(), encoders::kFeatureDim,
                                                    derive_seed(cfg.seed, 0x4E));
  heads::FusionHead& head = *result.head;
  nn::Adam opt(head.parameters(), static_cast<float>(cfg.lr));
  Rng rng = make_rng(cfg.seed, 0xF7);
  const std::size_t width = feats.dim(1);

  auto support_acc = [&] { return accuracy(heads::predict(head.forward(feats, nn::Mode::eval)), labels); };
  result.initial_acc = support_acc();
  for (std::size_t epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
    const auto order = shuffled(feats.dim(0), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.finetune_batch_size) {
      const std::size_t b = std::min(cfg.finetune_batch_size, order.size() - start);
      Tensor x({b, width});
      std::vector<std::size_t> y(b);
      for (std::size_t i = 0; i < b; ++i) {
        std::copy_n(feats.data() + order[start + i] * width, width, x.data() + i * width);
        y[i] = labels[order[start + i]];
      }
      opt.zero_grad();
      const Tensor logits = head.forward(x, nn::Mode::train);
      const heads::CrossEntropy ce = heads::cross_entropy(Mat::from_tensor(logits), y);
      head.backward(ce.grad.to_tensor());
      opt.step();
      loss_sum += ce.value;
      ++batches;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    result.epoch_acc.push_back(support_acc());
    log.emit({{"stage", "finetune"}, {"epoch", epoch + 1}, {"loss", result.epoch_loss.back()},
              {"acc", result.epoch_acc.back()}});
  }
  return result;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json pc = nlohmann::json::object(), ps = nlohmann::json::object(), pn = nlohmann::json::object();
  for (const auto& [k, v] : per_class) pc[k] = v;
  for (const auto& [k, v] : per_snr) ps[std::to_string(k)] = v;
  for (const auto& [k, v] : per_snr_count) pn[std::to_string(k)] = v;
  return {{"overall", overall}, {"count", count}, {"per_class", pc}, {"per_snr", ps}, {"per_snr_count", pn}};
}

EvalReport evaluate(Model& model, heads::FusionHead& head, const sigdata::Dataset& query, const RunConfig& cfg) {
  EvalReport r;
  if (query.empty()) return r;
  const auto triples = dataset_triples(query, cfg);
  const Tensor feats = embed(model, triples, cfg.fusion.mode);
  const auto pred = heads::predict(head.forward(feats, nn::Mode::eval));
  const auto truth = label_vector(query);
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> by_class;
  std::map<int, std::pair<std::size_t, std::size_t>> by_snr;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool ok = pred[i] == truth[i];
    hit += ok;
    auto& c = by_class[truth[i]];
    c.first += ok;
    ++c.second;
    auto& s = by_snr[query.snr_db(i)];
    s.first += ok;
    ++s.second;
  }
  r.count = pred.size();
  r.overall = static_cast<double>(hit) / static_cast<double>(pred.size());
  for (const auto& [c, hs] : by_class)
    r.per_class[query.class_names().at(c)] = static_cast<double>(hs.first) / static_cast<double>(hs.second);
  for (const auto& [s, hs] : by_snr) {
    r.per_snr[s] = static_cast<double>(hs.first) / static_cast<double>(hs.second);
    r.per_snr_count[s] = hs.second;
  }
  return r;
}

ExperimentResult run_experiment(const sigdata::Dataset& train, const sigdata::Dataset& test, const RunConfig& cfg,
                                MetricsLog& log) {
  cfg.validate();
  log.emit({{"stage", "config"}, {"config", config::to_json(cfg)}});
  const sigdata::Splits splits = sigdata::split(train, test, {cfg.base_fraction, cfg.shots, cfg.seed});
  Model model(cfg, cfg.seed);
  ExperimentResult out;
  out.pretrain = pretrain(model, sigdata::UnlabeledView(splits.base), splits.support, cfg, log);
  out.finetune = finetune(model, splits.support, cfg, log);
  out.eval = evaluate(model, *out.finetune.head, splits.query, cfg);
  log.emit({{"stage", "eval"}, {"acc", out.eval.overall}, {"breakdown", out.eval.to_json()}});
  return out;
}

std::string make_run_id(const RunConfig& cfg) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : config::to_text(cfg)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "run-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sigcl::pipeline
