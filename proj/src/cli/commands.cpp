#include "sigcl/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sigcl/config.hpp"
#include "sigcl/errors.hpp"
#include "sigcl/io.hpp"
#include "sigcl/pipeline.hpp"

namespace fs = std::filesystem;

namespace sigcl::cli {
namespace {

using pipeline::RunConfig;

int to_int(const std::string& s, const std::string& what) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw InvalidArgument(what + ": '" + s + "' is not an integer");
  return v;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) cfg = config::parse_text(io::read_text(path));
  for (const auto& o : overrides) config::apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

struct RunPaths {
  fs::path root;
  fs::path config() const { return root / "config.txt"; }
  fs::path run_json() const { return root / "run.json"; }
  fs::path metrics() const { return root / "metrics.jsonl"; }
  fs::path checkpoints() const { return root / "checkpoints"; }
  fs::path pretrain_ckpt() const { return checkpoints() / "pretrain"; }
  fs::path head_ckpt() const { return checkpoints() / "head"; }
  fs::path report() const { return root / "report.json"; }
};

struct LoadedRun {
  RunPaths paths;
  RunConfig cfg;
  nlohmann::json meta;
};

LoadedRun open_run(const std::string& dir) {
  RunPaths p{dir};
  if (!fs::is_directory(p.root)) throw MissingInput("run directory not found: " + dir);
  if (!fs::exists(p.config()) || !fs::exists(p.run_json())) throw MissingInput("not a run directory (config.txt/run.json missing): " + dir);
  LoadedRun r{p, config::parse_text(io::read_text(p.config())), nlohmann::json::parse(io::read_text(p.run_json()))};
  return r;
}

sigdata::Splits make_splits(const sigdata::Dataset& train, const sigdata::Dataset& test, const RunConfig& cfg) {
  return sigdata::split(train, test, {cfg.base_fraction, cfg.shots, cfg.seed});
}

std::unique_ptr<heads::FusionHead> make_head(const RunConfig& cfg, pipeline::Model& model, std::size_t classes) {
  heads::FusionConfig f = cfg.fusion;
  f.num_classes = classes;
  return std::make_unique<heads::FusionHead>(f, model.domain_count(), encoders::kFeatureDim, derive_seed(cfg.seed, 0x4E));
}

void write_json(const fs::path& path, const nlohmann::json& j) { io::write_text(path, j.dump(2) + "\n"); }

// Refuses to reuse a finished directory unless --force is given.
void prepare_out_dir(const fs::path& dir, bool force, const fs::path& marker) {
  if (fs::exists(marker) && !force)
    throw InvalidArgument("output '" + dir.string() + "' already holds results; pass --force to recompute");
  fs::create_directories(dir);
}

// ------------------------------------------------------------------ gen

int cmd_gen(const std::string& classes, std::size_t per_class, const std::string& snr, std::size_t len,
            std::uint64_t seed, const std::string& out, double cfo_max, const std::string& pulse, bool force,
            std::ostream& os) {
  sigdata::DatasetSpec spec;
  try {
    spec.classes = parse_class_list(classes);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("--classes: ") + e.what());
  }
  try {
    spec.snr_list = parse_snr_list(snr);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("--snr: ") + e.what());
  }
  if (per_class == 0) throw InvalidArgument("--per-class: must be positive");
  if (len < 8) throw InvalidArgument("--len: must be at least 8");
  if (!(cfo_max >= 0.0 && cfo_max < 0.5)) throw InvalidArgument("--cfo-max: must lie in [0, 0.5)");
  spec.frames_per_class_per_snr = per_class;
  spec.frame_len = len;
  spec.seed = seed;
  spec.generator.cfo_max = cfo_max;
  if (pulse == "rrc") spec.generator.pulse = sigdata::PulseShape::root_raised_cosine;
  else if (pulse == "rect") spec.generator.pulse = sigdata::PulseShape::rectangular;
  else throw InvalidArgument("--pulse: expected rrc or rect, got '" + pulse + "'");
  if (fs::exists(fs::path(out) / "manifest.json") && !force)
    throw InvalidArgument("--out: '" + out + "' already exists; pass --force to overwrite");
  const sigdata::Dataset ds = sigdata::generate_dataset(spec);
  sigdata::save(ds, out);
  os << "wrote " << ds.size() << " frames (" << ds.num_classes() << " classes, " << spec.snr_list.size()
     << " SNR levels) to " << out << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ pretrain

int cmd_pretrain(const std::string& train_path, const std::string& test_path, const std::string& cfg_path,
                 const std::vector<std::string>& overrides, const std::string& out, bool force, std::ostream& os) {
  const RunConfig cfg = load_config(cfg_path, overrides);
  const sigdata::Dataset train = sigdata::load(train_path);
  if (!test_path.empty() && !fs::is_directory(test_path)) throw MissingInput("test dataset not found: " + test_path);
  RunPaths p{out};
  prepare_out_dir(p.root, force, p.metrics());
  if (force) fs::remove_all(p.checkpoints());
  io::write_text(p.config(), config::to_text(cfg));
  const std::string run_id = pipeline::make_run_id(cfg);
  const sigdata::Splits splits = make_splits(train, train, cfg);
  write_json(p.run_json(), {{"run_id", run_id},
                            {"train", fs::absolute(train_path).string()},
                            {"test", test_path.empty() ? "" : fs::absolute(test_path).string()},
                            {"base_indices", splits.base_indices},
                            {"support_indices", splits.support_indices}});
  pipeline::MetricsLog log(p.metrics());
  log.set_run_id(run_id);
  log.emit({{"stage", "config"}, {"config", config::to_json(cfg)}});
  pipeline::Model model(cfg, cfg.seed);
  const auto result = pipeline::pretrain(model, sigdata::UnlabeledView(splits.base), splits.support, cfg, log, p.checkpoints());
  os << "pretrain: " << result.trace.size() << " RL steps, best clustering accuracy " << result.best_acc << " at step "
     << result.best_step << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------ finetune / eval

int cmd_finetune(const std::string& run_dir, std::optional<std::size_t> shots, const std::vector<std::string>& overrides,
                 std::ostream& os) {
  LoadedRun run = open_run(run_dir);
  if (shots) run.cfg.shots = *shots;
  for (const auto& o : overrides) config::apply_override(run.cfg, o);
  run.cfg.validate();
  if (!fs::exists(run.paths.pretrain_ckpt() / "manifest.json"))
    throw MissingInput("pretraining checkpoint missing: " + run.paths.pretrain_ckpt().string());
  const sigdata::Dataset train = sigdata::load(run.meta.at("train").get<std::string>());
  const sigdata::Splits splits = make_splits(train, train, run.cfg);
  pipeline::Model model(run.cfg, run.cfg.seed);
  pipeline::load_model(model, run.paths.pretrain_ckpt());
  pipeline::MetricsLog log(run.paths.metrics(), true);
  log.set_run_id(run.meta.at("run_id").get<std::string>());
  const auto ft = pipeline::finetune(model, splits.support, run.cfg, log);
  checkpoint::save(run.paths.head_ckpt(), {ft.head->module()},
                   {{"shots", run.cfg.shots}, {"config", config::to_json(run.cfg)}});
  io::write_text(run.paths.root / "finetune_config.txt", config::to_text(run.cfg));
  os << "finetune: " << ft.epoch_loss.size() << " epochs, support accuracy " << ft.epoch_acc.back() << "\n";
  return kExitOk;
}

RunConfig finetuned_config(const LoadedRun& run) {
  const fs::path f = run.paths.root / "finetune_config.txt";
  return fs::exists(f) ? config::parse_text(io::read_text(f)) : run.cfg;
}

int cmd_eval(const std::string& run_dir, const std::string& test_override, std::ostream& os) {
  const LoadedRun run = open_run(run_dir);
  if (!fs::exists(run.paths.head_ckpt() / "manifest.json"))
    throw MissingInput("fine-tuned head checkpoint missing: " + run.paths.head_ckpt().string() + " (run finetune first)");
  const RunConfig cfg = finetuned_config(run);
  const std::string test_path = test_override.empty() ? run.meta.value("test", std::string()) : test_override;
  if (test_path.empty()) throw MissingInput("no test dataset recorded for this run; pass --test");
  const sigdata::Dataset test = sigdata::load(test_path);
  pipeline::Model model(cfg, cfg.seed);
  pipeline::load_model(model, run.paths.pretrain_ckpt());
  auto head = make_head(cfg, model, test.num_classes());
  checkpoint::load(run.paths.head_ckpt(), {head->module()});
  const pipeline::EvalReport r = pipeline::evaluate(model, *head, test, cfg);
  nlohmann::json report = r.to_json();
  report["shots"] = cfg.shots;
  report["run_id"] = run.meta.at("run_id");
  report["snr_levels"] = test.snr_levels();
  write_json(run.paths.report(), report);
  pipeline::MetricsLog log(run.paths.metrics(), true);
  log.set_run_id(run.meta.at("run_id").get<std::string>());
  log.emit({{"stage", "eval"}, {"acc", r.overall}, {"breakdown", r.to_json()}});
  os << "eval: overall accuracy " << r.overall << " on " << r.count << " frames\n";
  return kExitOk;
}

// ------------------------------------------------------------------ ablate

struct AblationRow {
  std::string name;
  std::vector<std::string> overrides;
};

std::vector<AblationRow> ablation_rows(const std::string& axis) {
  if (axis == "loss")
    return {{"Loss_1", {"loss.intra=1", "loss.inter_orig=0", "loss.inter_aug=0", "loss.inter_cross=0"}},
            {"Loss_1+2", {"loss.intra=1", "loss.inter_orig=1", "loss.inter_aug=0", "loss.inter_cross=0"}},
            {"Loss_1+3", {"loss.intra=1", "loss.inter_orig=0", "loss.inter_aug=1", "loss.inter_cross=0"}},
            {"Loss_1+2+3", {"loss.intra=1", "loss.inter_orig=1", "loss.inter_aug=1", "loss.inter_cross=0"}},
            {"Loss_1+2+3+4", {"loss.intra=1", "loss.inter_orig=1", "loss.inter_aug=1", "loss.inter_cross=1"}}};
  if (axis == "aug")
    return {{"noise", {"aug.enabled=noise"}},
            {"+shift", {"aug.enabled=noise,shift"}},
            {"+scale", {"aug.enabled=noise,shift,scale"}},
            {"+dropout", {"aug.enabled=noise,shift,scale,dropout"}},
            {"+interpolate", {"aug.enabled=noise,shift,scale,dropout,interpolate"}}};
  if (axis == "domains")
    return {{"T", {"domains=T", "rl=0"}},
            {"T+F", {"domains=TF", "rl=0"}},
            {"T+F+C", {"domains=TFC", "rl=0"}},
            {"T+F+C+R", {"domains=TFC", "rl=1"}}};
  if (axis == "fusion")
    return {{"A", {"fusion.mode=add", "fusion.attention=0", "fusion.classifier_head=0"}},
            {"D", {"fusion.mode=dot", "fusion.attention=0", "fusion.classifier_head=0"}},
            {"C", {"fusion.mode=concat", "fusion.attention=0", "fusion.classifier_head=0"}},
            {"C+AM", {"fusion.mode=concat", "fusion.attention=1", "fusion.classifier_head=0"}},
            {"C+LC", {"fusion.mode=concat", "fusion.attention=0", "fusion.classifier_head=1"}},
            {"C+AM+LC", {"fusion.mode=concat", "fusion.attention=1", "fusion.classifier_head=1"}}};
  if (axis == "encoder")
    return {{"res1d", {"encoder.time.kind=res1d"}}, {"cnn1d-plain", {"encoder.time.kind=cnn1d-plain"}}};
  std::string valid;
  for (const auto& a : ablation_axes()) valid += (valid.empty() ? "" : ", ") + a;
  throw InvalidArgument("--axis: unknown axis '" + axis + "' (valid: " + valid + ")");
}

int cmd_ablate(const std::string& train_path, const std::string& test_path, const std::string& cfg_path,
               const std::vector<std::string>& overrides, const std::string& axis, const std::string& out, bool force,
               std::ostream& os) {
  const auto rows = ablation_rows(axis);
  const RunConfig base = load_config(cfg_path, overrides);
  const sigdata::Dataset train = sigdata::load(train_path);
  const sigdata::Dataset test = sigdata::load(test_path);
  const fs::path root(out);
  prepare_out_dir(root, force, root / "ablation.json");
  nlohmann::json table = nlohmann::json::array();
  std::ostringstream text;
  text << "axis: " << axis << "\nrow\taccuracy\tbest_cluster_acc\n";
  for (const auto& row : rows) {
    RunConfig cfg = base;
    for (const auto& o : row.overrides) config::apply_override(cfg, o);
    cfg.validate();
    pipeline::MetricsLog log(root / ("metrics_" + row.name + ".jsonl"));
    log.set_run_id(pipeline::make_run_id(cfg));
    const auto r = pipeline::run_experiment(train, test, cfg, log);
    table.push_back({{"row", row.name}, {"overrides", row.overrides}, {"accuracy", r.eval.overall},
                     {"best_cluster_acc", r.pretrain.best_acc}, {"per_snr", r.eval.to_json()["per_snr"]}});
    text << row.name << "\t" << r.eval.overall << "\t" << r.pretrain.best_acc << "\n";
  }
  write_json(root / "ablation.json", {{"axis", axis}, {"seed", base.seed}, {"rows", table}});
  io::write_text(root / "ablation.txt", text.str());
  os << text.str();
  return kExitOk;
}

// ------------------------------------------------------------------ export

int cmd_export(const std::string& run_dir, const std::string& split_name, const std::string& out, std::ostream& os) {
  const LoadedRun run = open_run(run_dir);
  if (!fs::exists(run.paths.pretrain_ckpt() / "manifest.json"))
    throw MissingInput("pretraining checkpoint missing: " + run.paths.pretrain_ckpt().string());
  const RunConfig& cfg = run.cfg;
  const sigdata::Dataset train = sigdata::load(run.meta.at("train").get<std::string>());
  sigdata::Dataset chosen;
  if (split_name == "query") {
    const std::string tp = run.meta.value("test", std::string());
    if (tp.empty()) throw MissingInput("no test dataset recorded for this run");
    chosen = sigdata::load(tp);
  } else {
    sigdata::Splits s = make_splits(train, train, cfg);
    if (split_name == "base") chosen = std::move(s.base);
    else if (split_name == "support") chosen = std::move(s.support);
    else throw InvalidArgument("--split: expected base, support or query, got '" + split_name + "'");
  }
  pipeline::Model model(cfg, cfg.seed);
  pipeline::load_model(model, run.paths.pretrain_ckpt());
  std::vector<domains::DomainTriple> triples;
  for (std::size_t i = 0; i < chosen.size(); ++i) triples.push_back(pipeline::prepare_triple(chosen.iq(i), cfg));
  const Tensor emb = pipeline::embed(model, triples, heads::FusionMode::concat);
  const fs::path dir(out.empty() ? (run.paths.root / "export").string() : out);
  fs::create_directories(dir);
  const auto emb_bytes = io::encode_le<float>(emb.values());
  io::write_file(dir / ("embeddings_" + split_name + ".f32"), emb_bytes);
  const auto labels = chosen.labels();
  io::write_file(dir / ("labels_" + split_name + ".u16"), io::encode_le<std::uint16_t>(labels));
  write_json(dir / ("embeddings_" + split_name + ".json"),
             {{"rows", emb.dim(0)}, {"cols", emb.dim(1)}, {"dtype", "f32le"}, {"labels_dtype", "u16le"},
              {"class_names", chosen.class_names()}});
  os << "exported " << emb.dim(0) << " x " << emb.dim(1) << " embeddings to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

const std::vector<std::string>& ablation_axes() {
  static const std::vector<std::string> axes{"loss", "aug", "domains", "fusion", "encoder"};
  return axes;
}

std::vector<int> parse_snr_list(const std::string& text) {
  if (text.empty()) throw InvalidArgument("empty SNR specification");
  std::vector<int> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ':')) parts.push_back(item);
    if (parts.size() < 2 || parts.size() > 3) throw InvalidArgument("expected lo:hi[:step], got '" + text + "'");
    const int lo = to_int(parts[0], "SNR start"), hi = to_int(parts[1], "SNR end");
    const int step = parts.size() == 3 ? to_int(parts[2], "SNR step") : 1;
    if (step <= 0) throw InvalidArgument("SNR step must be positive");
    if (hi < lo) throw InvalidArgument("SNR range end " + std::to_string(hi) + " is below start " + std::to_string(lo));
    for (int v = lo; v <= hi; v += step) out.push_back(v);
  } else {
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(to_int(item, "SNR value"));
  }
  std::set<int> seen(out.begin(), out.end());
  if (seen.size() != out.size()) throw InvalidArgument("duplicate SNR levels in '" + text + "'");
  return out;
}

std::vector<sigdata::Modulation> parse_class_list(const std::string& text) {
  std::vector<sigdata::Modulation> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto m = sigdata::parse_modulation(item);
    if (std::find(out.begin(), out.end(), m) != out.end()) throw InvalidArgument("duplicate class '" + item + "'");
    out.push_back(m);
  }
  if (out.empty()) throw InvalidArgument("no classes given");
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-domain contrastive pretraining and few-shot evaluation for IQ signals", "sigcl"};
  app.require_subcommand(1);

  std::string classes = "bpsk,qpsk,8psk,16qam", snr = "10:18:2", gen_out, pulse = "rrc";
  std::size_t per_class = 500, len = 128;
  std::uint64_t gen_seed = 0;
  double cfo_max = 0.01;
  bool gen_force = false;
  auto* gen = app.add_subcommand("gen", "generate a synthetic .sigds dataset");
  gen->add_option("--classes", classes, "comma-separated modulations")->capture_default_str();
  gen->add_option("--per-class", per_class, "frames per class per SNR level")->capture_default_str();
  gen->add_option("--snr", snr, "SNR levels: lo:hi:step or a,b,c")->capture_default_str();
  gen->add_option("--len", len, "frame length N")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  gen->add_option("--cfo-max", cfo_max, "carrier offset range, cycles/sample")->capture_default_str();
  gen->add_option("--pulse", pulse, "rrc or rect")->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_flag("--force", gen_force, "overwrite an existing dataset");

  std::string train_path, test_path, cfg_path, run_out;
  std::vector<std::string> sets;
  bool force = false;
  auto* pre = app.add_subcommand("pretrain", "contrastive pretraining with the augmentation agent");
  pre->add_option("--train", train_path, "training .sigds")->required();
  pre->add_option("--test", test_path, "test .sigds (recorded for eval)");
  pre->add_option("--config", cfg_path, "key = value config file");
  pre->add_option("--set", sets, "config override key=value (repeatable)");
  pre->add_option("--out", run_out, "run directory")->required();
  pre->add_flag("--force", force, "recompute into an existing run directory");

  std::string run_dir;
  std::size_t shots = 0;
  auto* ft = app.add_subcommand("finetune", "train the fusion head on the support set");
  ft->add_option("--run", run_dir, "run directory")->required();
  auto* shots_opt = ft->add_option("--shots", shots, "labeled frames per class");
  ft->add_option("--set", sets, "config override key=value (repeatable)");

  std::string eval_test;
  auto* ev = app.add_subcommand("eval", "evaluate the frozen model on the query set");
  ev->add_option("--run", run_dir, "run directory")->required();
  ev->add_option("--test", eval_test, "override the recorded test dataset");

  std::string axis, ablate_out;
  auto* ab = app.add_subcommand("ablate", "run one ablation grid");
  ab->add_option("--train", train_path, "training .sigds")->required();
  ab->add_option("--test", test_path, "test .sigds")->required();
  ab->add_option("--config", cfg_path, "key = value config file");
  ab->add_option("--set", sets, "config override key=value (repeatable)");
  ab->add_option("--axis", axis, "loss | aug | domains | fusion | encoder")->required();
  ab->add_option("--out", ablate_out, "output directory")->required();
  ab->add_flag("--force", force, "recompute into an existing directory");

  std::string split_name = "query", export_out;
  auto* ex = app.add_subcommand("export-embeddings", "dump fused encoder features");
  ex->add_option("--run", run_dir, "run directory")->required();
  ex->add_option("--split", split_name, "base | support | query")->capture_default_str();
  ex->add_option("--out", export_out, "output directory (default <run>/export)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadFlags;
  }

  try {
    if (*gen) return cmd_gen(classes, per_class, snr, len, gen_seed, gen_out, cfo_max, pulse, gen_force, out);
    if (*pre) return cmd_pretrain(train_path, test_path, cfg_path, sets, run_out, force, out);
    if (*ft)
      return cmd_finetune(run_dir, shots_opt->count() ? std::optional<std::size_t>(shots) : std::nullopt, sets, out);
    if (*ev) return cmd_eval(run_dir, eval_test, out);
    if (*ab) return cmd_ablate(train_path, test_path, cfg_path, sets, axis, ablate_out, force, out);
    if (*ex) return cmd_export(run_dir, split_name, export_out, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadFlags;
  } catch (const MissingInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitBadFlags;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace sigcl::cli
