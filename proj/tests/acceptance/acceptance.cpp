// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit when any
// criterion fails. `acceptance 3 5` runs a subset.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "sigcl/augment.hpp"
#include "sigcl/clustering.hpp"
#include "sigcl/conloss.hpp"
#include "sigcl/domains.hpp"
#include "sigcl/pipeline.hpp"
#include "sigcl/sac.hpp"
#include "sigcl/sigdata.hpp"

using namespace sigcl;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Tensor random_iq(std::size_t n, Rng& rng) {
  Tensor t({2, n});
  for (float& v : t.values()) v = static_cast<float>(standard_normal(rng));
  return t;
}

std::vector<std::vector<float>> param_values(const std::vector<nn::Param*>& ps) {
  std::vector<std::vector<float>> out;
  for (auto* p : ps) out.push_back(p->value);
  return out;
}

// ---------------------------------------------------------------- 1

Outcome dft_oracle() {
  Rng rng = make_rng(1);
  double worst_bin = 0.0, worst_parseval = 0.0;
  for (std::size_t n : {16, 64, 128}) {
    for (int f = 0; f < 100; ++f) {
      const Tensor x = random_iq(n, rng);
      const Tensor got = domains::to_frequency(x, domains::FreqRepr::reim);
      double et = 0.0, ef = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> ref = 0.0;
        for (std::size_t t = 0; t < n; ++t)
          ref += std::complex<double>(x[t], x[n + t]) *
                 std::polar(1.0, -2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n));
        const std::complex<double> g(got[k], got[n + k]);
        if (std::abs(ref) > 0.0) worst_bin = std::max(worst_bin, std::abs(g - ref) / std::abs(ref));
        ef += std::norm(g);
        et += double(x[k]) * x[k] + double(x[n + k]) * x[n + k];
      }
      worst_parseval = std::max(worst_parseval, std::fabs(ef / static_cast<double>(n) - et) / et);
    }
  }
  return {worst_bin < 1e-5 && worst_parseval < 1e-5,
          "max bin rel err " + fmt("%.2e", worst_bin) + ", max Parseval rel err " + fmt("%.2e", worst_parseval)};
}

// ---------------------------------------------------------------- 2

Outcome augmentation_identities() {
  Rng rng = make_rng(2);
  std::size_t identical = 0;
  for (int i = 0; i < 100; ++i) {
    const auto t = domains::to_triple(random_iq(128, rng), domains::ConstellationSpec{});
    identical += augment::augment_triple(t, augment::AugAction::zero(), augment::AugRanges{}, rng) == t;
  }
  bool shift_ok = true;
  for (std::size_t n : {16, 64, 128}) {
    const Tensor x = random_iq(n, rng);
    shift_ok = shift_ok && augment::time_shift(x, static_cast<long>(n)) == x;
  }
  const double p = 0.3;
  const std::size_t n = 128, trials = 500;
  std::size_t dropped = 0;
  bool whole_columns = true;
  for (std::size_t t = 0; t < trials; ++t) {
    const Tensor y = augment::random_dropout(Tensor({2, n}, 1.0f), p, rng);
    for (std::size_t i = 0; i < n; ++i) {
      whole_columns = whole_columns && y[i] == y[n + i];
      dropped += y[i] == 0.0f;
    }
  }
  const double mean = static_cast<double>(trials * n) * p;
  const double z = (static_cast<double>(dropped) - mean) / std::sqrt(mean * (1.0 - p));
  return {identical == 100 && shift_ok && whole_columns && std::fabs(z) <= 3.0,
          std::to_string(identical) + "/100 zero-action identities, shift(N) " + (shift_ok ? "ok" : "broken") +
              ", dropout z-score " + fmt("%.2f", z)};
}

// ---------------------------------------------------------------- 3

Outcome loss_analytics() {
  using namespace conloss;
  const double ln2 = std::log(2.0);
  const Mat eq(2, 8, 0.7);
  double err = std::max(std::fabs(intra_loss(eq, eq, 0.05) - ln2), std::fabs(inter_loss(eq, eq, 0.05) - ln2));
  ViewSet same;
  for (auto& d : same.z)
    for (auto& m : d) m = eq;
  LossConfig base;
  base.lambda = 0.8;
  const double total_err = std::fabs(total_loss(same, base).value - 3.6 * ln2);

  // Loss ablation rows: 1; 1+2; 1+3; 1+2+3; 1+2+3+4.
  const std::vector<LossTerms> rows{{true, false, false, false},
                                    {true, true, false, false},
                                    {true, false, true, false},
                                    {true, true, true, false},
                                    {true, true, true, true}};
  Rng rng = make_rng(3);
  double worst = 0.0;
  for (const auto& terms : rows) {
    LossConfig cfg;
    cfg.terms = terms;
    ViewSet v;
    for (auto& d : v.z)
      for (auto& m : d) {
        m = Mat(4, 8);
        for (double& x : m.v) x = standard_normal(rng);
      }
    const TotalLoss t = total_loss(v, cfg);
    const double h = 1e-6;
    for (std::size_t d = 0; d < 3; ++d)
      for (int view = 0; view < 2; ++view)
        for (std::size_t i = 0; i < v.z[d][view].v.size(); ++i) {
          double& x = v.z[d][view].v[i];
          const double keep = x;
          x = keep + h;
          const double lp = total_loss(v, cfg).value;
          x = keep - h;
          const double lm = total_loss(v, cfg).value;
          x = keep;
          const double fd = (lp - lm) / (2.0 * h), an = t.grad[d][view].v[i];
          worst = std::max(worst, std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-3}));
        }
  }
  return {err < 1e-6 && total_err < 1e-6 && worst < 1e-4,
          "log2 err " + fmt("%.1e", err) + ", 3.6 log2 err " + fmt("%.1e", total_err) + ", max grad rel err " +
              fmt("%.2e", worst)};
}

// ---------------------------------------------------------------- 4

Outcome clustering_oracle() {
  Rng rng = make_rng(4);
  std::size_t agree = 0;
  for (int c = 0; c < 200; ++c) {
    const std::size_t k = 2 + uniform_index(rng, 4), m = 1 + uniform_index(rng, 40);
    std::vector<std::size_t> a(m), y(m), perm(k);
    for (std::size_t i = 0; i < m; ++i) {
      a[i] = uniform_index(rng, k);
      y[i] = uniform_index(rng, k);
    }
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
      std::size_t hits = 0;
      for (std::size_t i = 0; i < m; ++i) hits += perm[a[i]] == y[i];
      best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    agree += std::fabs(clustering::cluster_accuracy(a, y, k) - static_cast<double>(best) / static_cast<double>(m)) < 1e-12;
  }
  std::size_t monotone = 0;
  for (int f = 0; f < 50; ++f) {
    const std::size_t m = 20 + uniform_index(rng, 80);
    Mat x(m, 4);
    for (double& v : x.v) v = standard_normal(rng);
    clustering::KMeansConfig cfg;
    cfg.k = 2 + uniform_index(rng, 4);
    cfg.seed = static_cast<std::uint64_t>(f);
    bool ok = true;
    for (const auto& h : clustering::kmeans_fit(x, cfg).history)
      for (std::size_t i = 1; i < h.size(); ++i) ok = ok && h[i] <= h[i - 1] * (1.0 + 1e-12);
    monotone += ok;
  }
  return {agree == 200 && monotone == 50,
          std::to_string(agree) + "/200 accuracy matches, " + std::to_string(monotone) + "/50 monotone fits"};
}

// ---------------------------------------------------------------- 5

Outcome sac_sanity() {
  const sac::Action star{0.3, 0.7, 0.5, 0.2, 0.9};
  double mean_err = 0.0;
  for (int seed = 0; seed < 5; ++seed) {
    sac::SacConfig cfg;
    sac::Agent agent(cfg, static_cast<std::uint64_t>(seed));
    sac::ReplayBuffer buf(cfg.buffer_capacity);
    Rng rng = make_rng(static_cast<std::uint64_t>(seed), 99);
    const std::vector<double> s(cfg.state_dim, 0.0);
    for (int step = 0; step < 3000; ++step) {
      const sac::Action a = agent.select_action(s, sac::ActionMode::stochastic, rng);
      double r = 0.0;
      for (std::size_t d = 0; d < sac::kActionDim; ++d) r -= (a[d] - star[d]) * (a[d] - star[d]);
      buf.store({s, a, r, s, true});
      agent.train(buf, rng);
    }
    const sac::Action a = agent.select_action(s, sac::ActionMode::deterministic, rng);
    double e = 0.0;
    for (std::size_t d = 0; d < sac::kActionDim; ++d) e = std::max(e, std::fabs(a[d] - star[d]));
    mean_err += e / 5.0;
  }

  sac::SacConfig g0;
  g0.gamma = 0.0;
  g0.polyak = 0.9;
  sac::Agent agent(g0, 7);
  Rng rng = make_rng(7);
  bool target_ok = true;
  std::vector<sac::Transition> batch;
  for (int i = 0; i < 8; ++i) {
    sac::Transition t;
    t.state.assign(g0.state_dim, 0.01 * i);
    t.next_state.assign(g0.state_dim, -0.01 * i);
    t.action.fill(0.1 * i);
    t.reward = 0.37 * i - 1.0;
    t.done = i % 3 == 0;
    target_ok = target_ok && agent.target_q(t, rng) == t.reward;
    batch.push_back(t);
  }
  bool polyak_ok = true;
  const std::array before_all{param_values(agent.target_parameters(0)), param_values(agent.target_parameters(1))};
  agent.update(batch, rng);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& before = before_all[c];
    const auto online = param_values(agent.q_parameters(c));
    const auto after = param_values(agent.target_parameters(c));
    for (std::size_t p = 0; p < before.size(); ++p)
      for (std::size_t i = 0; i < before[p].size(); ++i) {
        const double want = 0.9 * before[p][i] + 0.1 * online[p][i];
        polyak_ok = polyak_ok && std::fabs(after[p][i] - want) <= 1e-6 * std::max(1.0, std::fabs(want));
      }
  }
  return {mean_err <= 0.15 && target_ok && polyak_ok,
          "bandit mean Linf err " + fmt("%.4f", mean_err) + ", gamma=0 target " + (target_ok ? "exact" : "WRONG") +
              ", polyak " + (polyak_ok ? "elementwise ok" : "MISMATCH")};
}

// ---------------------------------------------------------------- 6, 8 shared data

sigdata::Dataset smoke_train() {
  using sigdata::Modulation;
  return sigdata::generate_dataset(
      {{Modulation::bpsk, Modulation::qpsk, Modulation::psk8, Modulation::qam16}, 7, {10, 14, 18}, 128, 61});
}

pipeline::RunConfig smoke_config() {
  pipeline::RunConfig cfg;
  cfg.e_rl = 3;
  cfg.e_cl = 2;
  cfg.base_fraction = 16.0 / 21.0;  // 16 of 21 frames per class -> 64-frame base
  return cfg;
}

Outcome algorithm_fidelity() {
  const auto train = smoke_train();
  const auto cfg = smoke_config();
  const auto splits = sigdata::split(train, train, {cfg.base_fraction, cfg.shots, cfg.seed});
  std::vector<std::vector<nlohmann::json>> events;
  pipeline::PretrainResult first;
  for (int run = 0; run < 2; ++run) {
    pipeline::Model model(cfg, cfg.seed);
    pipeline::MetricsLog log;
    auto r = pipeline::pretrain(model, sigdata::UnlabeledView(splits.base), splits.support, cfg, log);
    events.push_back(log.stable_events());
    if (run == 0) first = std::move(r);
  }
  double trace_max = 0.0;
  for (const auto& s : first.trace) trace_max = std::max(trace_max, s.acc);
  const bool steps = first.trace.size() == 3;
  const bool zero_first = steps && first.trace[0].action.a == augment::AugAction::zero().a;
  const bool best = first.best_acc == trace_max;
  const bool unread = splits.base.label_reads() == 0;
  const bool same = events[0] == events[1];
  return {splits.base.size() == 64 && steps && zero_first && best && unread && same,
          std::to_string(first.trace.size()) + " steps, first action " + (zero_first ? "zero" : "NONZERO") +
              ", best " + fmt("%.3f", first.best_acc) + " vs trace max " + fmt("%.3f", trace_max) +
              ", base label reads " + std::to_string(splits.base.label_reads()) + ", repeat run " +
              (same ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------- 7

Outcome end_to_end() {
  using sigdata::Modulation;
  sigdata::DatasetSpec tr{{Modulation::bpsk, Modulation::qpsk, Modulation::psk8, Modulation::qam16},
                          100, {10, 12, 14, 16, 18}, 128, 7001};
  sigdata::DatasetSpec te = tr;
  te.frames_per_class_per_snr = 40;
  te.seed = 7002;
  const auto train = sigdata::generate_dataset(tr);
  const auto test = sigdata::generate_dataset(te);
  double full = 0.0, time_only = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    pipeline::RunConfig cfg;
    cfg.seed = seed;
    cfg.e_rl = 3;
    cfg.e_cl = 5;
    pipeline::MetricsLog log_full, log_t;
    const double a = pipeline::run_experiment(train, test, cfg, log_full).eval.overall;
    cfg.domains = {true, false, false};
    cfg.rl = false;
    const double b = pipeline::run_experiment(train, test, cfg, log_t).eval.overall;
    full += a / 3.0;
    time_only += b / 3.0;
    per_seed += fmt(" [%.3f", a) + fmt(" / %.3f]", b);
  }
  return {full >= 0.40 && full >= time_only,
          "mean query acc T+F+C+RL " + fmt("%.4f", full) + " (floor 0.40), T-only no-RL " + fmt("%.4f", time_only) +
              ", per seed" + per_seed};
}

// ---------------------------------------------------------------- 8

Outcome freeze_contracts() {
  const auto train = smoke_train();
  auto cfg = smoke_config();
  cfg.e_rl = 1;
  cfg.e_cl = 1;
  const auto splits = sigdata::split(train, train, {cfg.base_fraction, cfg.shots, cfg.seed});
  pipeline::Model model(cfg, cfg.seed);
  pipeline::MetricsLog log;
  pipeline::pretrain(model, sigdata::UnlabeledView(splits.base), splits.support, cfg, log);
  const auto enc = param_values(model.encoder_parameters());
  auto ft = pipeline::finetune(model, splits.support, cfg, log);
  const bool ft_ok = param_values(model.encoder_parameters()) == enc;
  const auto all = param_values(model.parameters());
  const auto head = param_values(ft.head->parameters());
  pipeline::evaluate(model, *ft.head, splits.query, cfg);
  const bool eval_ok = param_values(model.parameters()) == all && param_values(ft.head->parameters()) == head;
  return {ft_ok && eval_ok, std::string("fine-tune encoders ") + (ft_ok ? "bit-identical" : "CHANGED") +
                                ", evaluation parameters " + (eval_ok ? "bit-identical" : "CHANGED")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "DFT oracle", 10, dft_oracle},
      {2, "augmentation identities", 30, augmentation_identities},
      {3, "loss analytics", 60, loss_analytics},
      {4, "clustering oracle", 60, clustering_oracle},
      {5, "SAC sanity", 180, sac_sanity},
      {6, "pretraining schedule fidelity", 120, algorithm_fidelity},
      {7, "end-to-end learning signal", 900, end_to_end},
      {8, "freeze contracts", 60, freeze_contracts},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("[%s] criterion %d (%s): %s; %.1f s of %.0f s budget%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : " (over budget)");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
