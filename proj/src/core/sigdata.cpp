#include "sigcl/sigdata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <set>

#include <json.hpp>

#include "sigcl/errors.hpp"
#include "sigcl/io.hpp"

namespace sigcl::sigdata {

using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

struct ModEntry {
  Modulation id;
  std::string_view name;
};

constexpr ModEntry kModulations[] = {
    {Modulation::bpsk, "bpsk"},   {Modulation::qpsk, "qpsk"},   {Modulation::psk8, "8psk"},
    {Modulation::qam16, "16qam"}, {Modulation::qam64, "64qam"}, {Modulation::pam4, "pam4"},
    {Modulation::cpfsk, "cpfsk"}, {Modulation::fsk2, "2fsk"},
};

cd draw_symbol(Modulation m, Rng& rng) {
  switch (m) {
    case Modulation::bpsk:
      return uniform_index(rng, 2) ? cd(1.0, 0.0) : cd(-1.0, 0.0);
    case Modulation::qpsk:
      return std::polar(1.0, kPi / 4.0 + kPi / 2.0 * static_cast<double>(uniform_index(rng, 4)));
    case Modulation::psk8:
      return std::polar(1.0, kPi / 4.0 * static_cast<double>(uniform_index(rng, 8)));
    case Modulation::qam16: {
      const double i = 2.0 * static_cast<double>(uniform_index(rng, 4)) - 3.0;
      const double q = 2.0 * static_cast<double>(uniform_index(rng, 4)) - 3.0;
      return cd(i, q) / std::sqrt(10.0);
    }
    case Modulation::qam64: {
      const double i = 2.0 * static_cast<double>(uniform_index(rng, 8)) - 7.0;
      const double q = 2.0 * static_cast<double>(uniform_index(rng, 8)) - 7.0;
      return cd(i, q) / std::sqrt(42.0);
    }
    case Modulation::pam4:
      return cd((2.0 * static_cast<double>(uniform_index(rng, 4)) - 3.0) / std::sqrt(5.0), 0.0);
    default:
      break;
  }
  throw InvalidArgument("draw_symbol: not a linear modulation");
}

void normalize_power(std::vector<cd>& x) {
  double power = 0.0;
  for (const cd& v : x) power += std::norm(v);
  power /= static_cast<double>(x.size());
  if (power <= 0.0) return;
  const double g = 1.0 / std::sqrt(power);
  for (cd& v : x) v *= g;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view modulation_name(Modulation m) {
  for (const auto& e : kModulations)
    if (e.id == m) return e.name;
  return "unknown";
}

Modulation parse_modulation(std::string_view name) {
  const std::string key = lower(name);
  for (const auto& e : kModulations)
    if (e.name == key) return e.id;
  throw InvalidArgument("unknown modulation '" + std::string(name) + "'");
}

std::vector<Modulation> all_modulations() {
  std::vector<Modulation> out;
  for (const auto& e : kModulations) out.push_back(e.id);
  return out;
}

void SignalFrame::validate() const {
  if (iq.rank() != 2 || iq.dim(0) != 2) throw InvalidArgument("SignalFrame: iq must be [2, N]");
  if (iq.dim(1) < 8) throw InvalidArgument("SignalFrame: N must be at least 8");
  for (const float v : iq.values())
    if (!std::isfinite(v)) throw InvalidArgument("SignalFrame: non-finite sample");
}

void ChannelParams::validate() const {
  if (!(std::abs(cfo) < 0.5)) throw InvalidArgument("ChannelParams: |cfo| must be below 0.5");
  if (impulse_response.empty()) throw InvalidArgument("ChannelParams: empty impulse response");
  if (std::isnan(snr_db)) throw InvalidArgument("ChannelParams: snr_db is NaN");
}

std::vector<double> rrc_taps(double rolloff, int sps, int span) {
  const int len = span * sps + 1;
  const double beta = rolloff;
  std::vector<double> h(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) {
    const double t = static_cast<double>(i - len / 2) / sps;
    double v;
    if (std::abs(t) < 1e-12) {
      v = 1.0 - beta + 4.0 * beta / kPi;
    } else if (beta > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * beta)) < 1e-9) {
      v = beta / std::sqrt(2.0) *
          ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * beta)) +
           (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * beta)));
    } else {
      v = (std::sin(kPi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(kPi * t * (1.0 + beta))) /
          (kPi * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t)));
    }
    h[static_cast<std::size_t>(i)] = v;
  }
  double energy = 0.0;
  for (const double v : h) energy += v * v;
  const double g = 1.0 / std::sqrt(energy);
  for (double& v : h) v *= g;
  return h;
}

std::vector<cd> modulate(Modulation m, std::size_t n, Rng& rng, const GeneratorConfig& cfg) {
  if (n < 8) throw InvalidArgument("generate_frame: n must be at least 8");
  if (cfg.oversampling < 1) throw InvalidArgument("generate_frame: oversampling must be >= 1");
  const auto sps = static_cast<std::size_t>(cfg.oversampling);
  if (n < static_cast<std::size_t>(cfg.min_symbols) * sps)
    throw InvalidArgument("generate_frame: n=" + std::to_string(n) + " is shorter than " +
                          std::to_string(cfg.min_symbols) + " symbols at oversampling " +
                          std::to_string(sps));
  const std::size_t symbols = (n + sps - 1) / sps;
  std::vector<cd> x(n);

  if (m == Modulation::cpfsk) {
    // Binary continuous-phase FSK, modulation index 0.5.
    double phase = 2.0 * kPi * uniform01(rng);
    for (std::size_t s = 0; s < symbols; ++s) {
      const double d = uniform_index(rng, 2) ? 1.0 : -1.0;
      for (std::size_t k = 0; k < sps && s * sps + k < n; ++k) {
        phase += kPi * 0.5 * d / static_cast<double>(sps);
        x[s * sps + k] = std::polar(1.0, phase);
      }
    }
    return x;
  }
  if (m == Modulation::fsk2) {
    // Non-coherent binary FSK: tones at +-1/(2 sps) cycles/sample, fresh phase per symbol.
    const double fdev = 0.5 / static_cast<double>(sps);
    for (std::size_t s = 0; s < symbols; ++s) {
      const double d = uniform_index(rng, 2) ? 1.0 : -1.0;
      const double phase0 = 2.0 * kPi * uniform01(rng);
      for (std::size_t k = 0; k < sps && s * sps + k < n; ++k)
        x[s * sps + k] = std::polar(1.0, phase0 + 2.0 * kPi * d * fdev * static_cast<double>(k));
    }
    return x;
  }

  if (cfg.pulse == PulseShape::rectangular) {
    for (std::size_t s = 0; s < symbols; ++s) {
      const cd sym = draw_symbol(m, rng);
      for (std::size_t k = 0; k < sps && s * sps + k < n; ++k) x[s * sps + k] = sym;
    }
  } else {
    const std::vector<double> taps = rrc_taps(cfg.rolloff, cfg.oversampling, cfg.filter_span);
    const std::size_t delay = taps.size() / 2;
    const std::size_t total_symbols = symbols + static_cast<std::size_t>(cfg.filter_span) + 1;
    // Output sample k sits at filtered index k + delay.
    for (std::size_t s = 0; s < total_symbols; ++s) {
      const cd sym = draw_symbol(m, rng);
      const std::size_t start = s * sps;
      for (std::size_t t = 0; t < taps.size(); ++t) {
        const std::size_t idx = start + t;
        if (idx < delay) continue;
        const std::size_t k = idx - delay;
        if (k >= n) break;
        x[k] += sym * taps[t];
      }
    }
  }
  normalize_power(x);
  return x;
}

SignalFrame generate_frame(Modulation m, std::size_t n, const ChannelParams& channel, Rng& rng,
                           const GeneratorConfig& cfg) {
  channel.validate();
  Rng symbol_rng(rng());
  Rng noise_rng(rng());
  const std::vector<cd> clean = modulate(m, n, symbol_rng, cfg);

  std::vector<cd> y(n);
  const auto& h = channel.impulse_response;
  for (std::size_t k = 0; k < n; ++k) {
    cd acc = 0.0;
    for (std::size_t l = 0; l < h.size() && l <= k; ++l) acc += h[l] * clean[k - l];
    y[k] = acc * std::polar(1.0, 2.0 * kPi * channel.cfo * static_cast<double>(k) + channel.phase0);
  }
  normalize_power(y);

  if (std::isfinite(channel.snr_db)) {
    const double sigma = std::sqrt(std::pow(10.0, -channel.snr_db / 10.0) / 2.0);
    for (cd& v : y) {
      const double ni = standard_normal(noise_rng);
      const double nq = standard_normal(noise_rng);
      v += cd(sigma * ni, sigma * nq);
    }
  }

  SignalFrame frame;
  frame.iq = Tensor({2, n});
  for (std::size_t k = 0; k < n; ++k) {
    frame.iq[k] = static_cast<float>(y[k].real());
    frame.iq[n + k] = static_cast<float>(y[k].imag());
  }
  frame.snr_db = std::isfinite(channel.snr_db) ? static_cast<int>(std::lround(channel.snr_db))
                                               : std::numeric_limits<std::int16_t>::max();
  return frame;
}

// ---------------------------------------------------------------- Dataset

Dataset::Dataset(std::vector<std::string> class_names, std::size_t frame_len, std::string provenance)
    : class_names_(std::move(class_names)), frame_len_(frame_len), provenance_(std::move(provenance)) {}

Dataset::Dataset(const Dataset& o)
    : frames_(o.frames_), class_names_(o.class_names_), frame_len_(o.frame_len_),
      provenance_(o.provenance_) {}

Dataset& Dataset::operator=(const Dataset& o) {
  if (this != &o) {
    frames_ = o.frames_;
    class_names_ = o.class_names_;
    frame_len_ = o.frame_len_;
    provenance_ = o.provenance_;
    label_reads_.store(0);
  }
  return *this;
}

Dataset::Dataset(Dataset&& o) noexcept
    : frames_(std::move(o.frames_)), class_names_(std::move(o.class_names_)),
      frame_len_(o.frame_len_), provenance_(std::move(o.provenance_)) {}

Dataset& Dataset::operator=(Dataset&& o) noexcept {
  frames_ = std::move(o.frames_);
  class_names_ = std::move(o.class_names_);
  frame_len_ = o.frame_len_;
  provenance_ = std::move(o.provenance_);
  label_reads_.store(0);
  return *this;
}

void Dataset::add(SignalFrame frame) {
  frame.validate();
  if (frame.length() != frame_len_)
    throw InvalidArgument("Dataset::add: frame length " + std::to_string(frame.length()) +
                          " != dataset frame_len " + std::to_string(frame_len_));
  if (frame.label >= class_names_.size())
    throw InvalidArgument("Dataset::add: label " + std::to_string(frame.label) +
                          " outside class list");
  frames_.push_back(std::move(frame));
}

std::uint16_t Dataset::label(std::size_t i) const {
  label_reads_.fetch_add(1, std::memory_order_relaxed);
  return frames_.at(i).label;
}

std::vector<std::uint16_t> Dataset::labels() const {
  label_reads_.fetch_add(frames_.size(), std::memory_order_relaxed);
  std::vector<std::uint16_t> out;
  out.reserve(frames_.size());
  for (const auto& f : frames_) out.push_back(f.label);
  return out;
}

std::vector<int> Dataset::snr_levels() const {
  std::set<int> levels;
  for (const auto& f : frames_) levels.insert(f.snr_db);
  return {levels.begin(), levels.end()};
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out(class_names_, frame_len_, provenance_);
  out.frames_.reserve(indices.size());
  for (const std::size_t i : indices) out.frames_.push_back(frames_.at(i));
  return out;
}

std::vector<std::vector<std::size_t>> Dataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(class_names_.size());
  for (std::size_t i = 0; i < frames_.size(); ++i) out[frames_[i].label].push_back(i);
  return out;
}

bool Dataset::same_content(const Dataset& o) const {
  if (class_names_ != o.class_names_ || frame_len_ != o.frame_len_ || frames_.size() != o.frames_.size())
    return false;
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    const auto& a = frames_[i];
    const auto& b = o.frames_[i];
    if (a.label != b.label || a.snr_db != b.snr_db || a.iq.shape() != b.iq.shape()) return false;
    if (std::memcmp(a.iq.data(), b.iq.data(), a.iq.size() * sizeof(float)) != 0) return false;
  }
  return true;
}

Dataset generate_dataset(const DatasetSpec& spec) {
  if (spec.classes.empty()) throw InvalidArgument("generate_dataset: empty class list");
  if (spec.snr_list.empty()) throw InvalidArgument("generate_dataset: empty SNR list");
  if (spec.frames_per_class_per_snr == 0)
    throw InvalidArgument("generate_dataset: frames_per_class_per_snr must be positive");
  std::vector<std::string> names;
  for (const Modulation m : spec.classes) {
    const std::string name(modulation_name(m));
    if (std::find(names.begin(), names.end(), name) != names.end())
      throw InvalidArgument("generate_dataset: duplicate class '" + name + "'");
    names.push_back(name);
  }
  nlohmann::json prov = {{"generator", "synthetic"},
                         {"seed", spec.seed},
                         {"frames_per_class_per_snr", spec.frames_per_class_per_snr},
                         {"oversampling", spec.generator.oversampling},
                         {"rolloff", spec.generator.rolloff},
                         {"cfo_max", spec.generator.cfo_max}};
  Dataset ds(names, spec.frame_len, prov.dump());
  std::uint64_t index = 0;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    for (const int snr : spec.snr_list) {
      for (std::size_t i = 0; i < spec.frames_per_class_per_snr; ++i, ++index) {
        Rng rng = make_rng(spec.seed, index);
        ChannelParams ch;
        ch.cfo = uniform(rng, -spec.generator.cfo_max, spec.generator.cfo_max);
        ch.phase0 = uniform(rng, spec.generator.phase_min, spec.generator.phase_max);
        ch.snr_db = snr;
        SignalFrame f = generate_frame(spec.classes[c], spec.frame_len, ch, rng, spec.generator);
        f.label = static_cast<std::uint16_t>(c);
        f.snr_db = snr;
        ds.add(std::move(f));
      }
    }
  }
  return ds;
}

Splits split(const Dataset& train, const Dataset& test, const SplitSpec& spec) {
  if (!(spec.base_fraction >= 0.0 && spec.base_fraction < 1.0))
    throw InvalidArgument("split: base_fraction must be in [0, 1)");
  if (spec.shots == 0) throw InvalidArgument("split: shots must be positive");
  if (train.class_names() != test.class_names())
    throw InvalidArgument("split: train and test class lists differ");
  Rng rng = make_rng(spec.seed, 0x5B117);
  Splits out;
  const auto groups = train.indices_by_class();
  for (std::size_t c = 0; c < groups.size(); ++c) {
    std::vector<std::size_t> idx = groups[c];
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
    const auto n_base = std::min<std::size_t>(
        idx.size(), static_cast<std::size_t>(std::llround(spec.base_fraction * static_cast<double>(idx.size()))));
    const std::size_t remaining = idx.size() - n_base;
    if (remaining < spec.shots)
      throw InvalidArgument("split: class '" + train.class_names()[c] + "' has " +
                            std::to_string(remaining) + " non-base frames, fewer than shots=" +
                            std::to_string(spec.shots));
    out.base_indices.insert(out.base_indices.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_base));
    out.support_indices.insert(out.support_indices.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_base),
                               idx.begin() + static_cast<std::ptrdiff_t>(n_base + spec.shots));
  }
  std::sort(out.base_indices.begin(), out.base_indices.end());
  std::sort(out.support_indices.begin(), out.support_indices.end());
  out.base = train.subset(out.base_indices);
  out.support = train.subset(out.support_indices);
  out.query = test;
  return out;
}

// ---------------------------------------------------------------- .sigds

void save(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t n = ds.frame_len();
  std::vector<float> iq;
  iq.reserve(ds.size() * 2 * n);
  std::vector<std::uint16_t> labels;
  std::vector<std::int16_t> snr;
  const auto groups = ds.indices_by_class();
  std::vector<std::uint16_t> label_of(ds.size());
  for (std::size_t c = 0; c < groups.size(); ++c)
    for (const std::size_t i : groups[c]) label_of[i] = static_cast<std::uint16_t>(c);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto v = ds.iq(i).values();
    iq.insert(iq.end(), v.begin(), v.end());
    labels.push_back(label_of[i]);
    snr.push_back(static_cast<std::int16_t>(ds.snr_db(i)));
  }
  io::write_file(dir / "iq.bin", io::encode_le<float>(iq));
  io::write_file(dir / "labels.bin", io::encode_le<std::uint16_t>(labels));
  io::write_file(dir / "snr.bin", io::encode_le<std::int16_t>(snr));
  nlohmann::json manifest = {
      {"version", "1"},
      {"num_frames", ds.size()},
      {"frame_len", n},
      {"class_names", ds.class_names()},
      {"snr_levels", ds.snr_levels()},
      {"dtype", "f32le"},
      {"files", {{"iq", "iq.bin"}, {"labels", "labels.bin"}, {"snr", "snr.bin"}}},
      {"provenance", ds.provenance()},
  };
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw MissingInput("dataset directory not found: " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  try {
    const std::string version = manifest.at("version").get<std::string>();
    if (version != "1") throw VersionError("unsupported .sigds version \"" + version + "\"");
    if (manifest.at("dtype").get<std::string>() != "f32le")
      throw FormatError("unsupported dtype " + manifest.at("dtype").dump());
    const auto num_frames = manifest.at("num_frames").get<std::size_t>();
    const auto n = manifest.at("frame_len").get<std::size_t>();
    const auto names = manifest.at("class_names").get<std::vector<std::string>>();
    const auto& files = manifest.at("files");
    const auto iq_bytes = io::read_file(dir / files.at("iq").get<std::string>());
    const auto label_bytes = io::read_file(dir / files.at("labels").get<std::string>());
    const auto snr_bytes = io::read_file(dir / files.at("snr").get<std::string>());
    if (iq_bytes.size() != num_frames * 2 * n * 4)
      throw FormatError("iq.bin holds " + std::to_string(iq_bytes.size()) + " bytes, manifest implies " +
                        std::to_string(num_frames * 2 * n * 4) + " (num_frames=" + std::to_string(num_frames) + ")");
    if (label_bytes.size() != num_frames * 2)
      throw FormatError("labels.bin size disagrees with num_frames=" + std::to_string(num_frames));
    if (snr_bytes.size() != num_frames * 2)
      throw FormatError("snr.bin size disagrees with num_frames=" + std::to_string(num_frames));
    const auto iq = io::decode_le<float>(iq_bytes, "iq.bin");
    const auto labels = io::decode_le<std::uint16_t>(label_bytes, "labels.bin");
    const auto snr = io::decode_le<std::int16_t>(snr_bytes, "snr.bin");
    Dataset ds(names, n, manifest.value("provenance", std::string(dir.string())));
    for (std::size_t i = 0; i < num_frames; ++i) {
      SignalFrame f;
      f.iq = Tensor({2, n}, std::vector<float>(iq.begin() + static_cast<std::ptrdiff_t>(i * 2 * n),
                                               iq.begin() + static_cast<std::ptrdiff_t>((i + 1) * 2 * n)));
      f.label = labels[i];
      f.snr_db = snr[i];
      try {
        ds.add(std::move(f));
      } catch (const InvalidArgument& e) {
        throw FormatError("frame " + std::to_string(i) + ": " + e.what());
      }
    }
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
}

}  // namespace sigcl::sigdata
