#pragma once

// Synthetic modulated IQ frames, the dataset container, few-shot splitting
// and the portable .sigds directory format.

#include <atomic>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sigcl/rng.hpp"
#include "sigcl/tensor.hpp"

namespace sigcl::sigdata {

enum class Modulation { bpsk, qpsk, psk8, qam16, qam64, pam4, cpfsk, fsk2 };

std::string_view modulation_name(Modulation m);
// Accepts the names produced by modulation_name (case-insensitive).
Modulation parse_modulation(std::string_view name);
std::vector<Modulation> all_modulations();

// One IQ record. iq is [2, N]: row 0 in-phase, row 1 quadrature.
struct SignalFrame {
  Tensor iq;
  std::uint16_t label = 0;
  int snr_db = 0;

  std::size_t length() const { return iq.rank() == 2 ? iq.dim(1) : 0; }
  void validate() const;
};

struct ChannelParams {
  double cfo = 0.0;     // carrier offset, cycles per sample
  double phase0 = 0.0;  // radians
  std::vector<std::complex<double>> impulse_response{1.0};
  // +infinity disables the noise term.
  double snr_db = std::numeric_limits<double>::infinity();

  void validate() const;
};

enum class PulseShape { root_raised_cosine, rectangular };

struct GeneratorConfig {
  int oversampling = 8;
  double rolloff = 0.35;
  int filter_span = 8;  // symbols covered by the RRC filter
  PulseShape pulse = PulseShape::root_raised_cosine;
  double cfo_max = 0.01;  // default channel draws cfo in [-cfo_max, cfo_max]
  double phase_min = 0.0;
  double phase_max = 6.283185307179586;
  int min_symbols = 2;
};

// Root-raised-cosine taps, unit energy, length span * sps + 1.
std::vector<double> rrc_taps(double rolloff, int sps, int span);

// Clean (pre-noise) complex baseband, unit mean power, before the channel
// rotation is applied. Exposed for tests that need the noiseless reference.
std::vector<std::complex<double>> modulate(Modulation m, std::size_t n, Rng& rng,
                                           const GeneratorConfig& cfg = {});

// Symbol sequence -> pulse shaping -> channel h -> rotation exp(j(2*pi*cfo*n + phase0))
// -> unit power normalization -> AWGN at snr_db. Symbols and noise come from
// two independent streams seeded from `rng`, so rerunning with the same seed
// and snr_db = inf reproduces the exact clean signal.
SignalFrame generate_frame(Modulation m, std::size_t n, const ChannelParams& channel, Rng& rng,
                           const GeneratorConfig& cfg = {});

// Frames that may be shared read-only. Label reads are counted so callers can
// prove a code path never looked at them.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> class_names, std::size_t frame_len, std::string provenance = {});
  Dataset(const Dataset& other);
  Dataset& operator=(const Dataset& other);
  Dataset(Dataset&& other) noexcept;
  Dataset& operator=(Dataset&& other) noexcept;

  void add(SignalFrame frame);

  std::size_t size() const { return frames_.size(); }
  bool empty() const { return frames_.empty(); }
  std::size_t frame_len() const { return frame_len_; }
  std::size_t num_classes() const { return class_names_.size(); }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::string& provenance() const { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

  const Tensor& iq(std::size_t i) const { return frames_.at(i).iq; }
  int snr_db(std::size_t i) const { return frames_.at(i).snr_db; }
  // Audited label access.
  std::uint16_t label(std::size_t i) const;
  std::vector<std::uint16_t> labels() const;
  std::uint64_t label_reads() const { return label_reads_.load(std::memory_order_relaxed); }

  // Sorted distinct SNR tags.
  std::vector<int> snr_levels() const;
  // Copies frames with labels; does not count as a label read.
  Dataset subset(std::span<const std::size_t> indices) const;
  // Indices grouped by label; does not count as a label read.
  std::vector<std::vector<std::size_t>> indices_by_class() const;

  // Bit-exact comparison of frames, names and frame length.
  bool same_content(const Dataset& other) const;

 private:
  std::vector<SignalFrame> frames_;
  std::vector<std::string> class_names_;
  std::size_t frame_len_ = 0;
  std::string provenance_;
  mutable std::atomic<std::uint64_t> label_reads_{0};
};

// Label-free view over a dataset; the only surface pretraining receives.
class UnlabeledView {
 public:
  explicit UnlabeledView(const Dataset& ds) : ds_(&ds) {}
  std::size_t size() const { return ds_->size(); }
  std::size_t frame_len() const { return ds_->frame_len(); }
  const Tensor& iq(std::size_t i) const { return ds_->iq(i); }

 private:
  const Dataset* ds_;
};

struct DatasetSpec {
  std::vector<Modulation> classes;
  std::size_t frames_per_class_per_snr = 0;
  std::vector<int> snr_list;
  std::size_t frame_len = 128;
  std::uint64_t seed = 0;
  GeneratorConfig generator{};
};

// Frames ordered class-major, then SNR, then draw index. Each frame uses the
// seed stream derive_seed(seed, frame_index), so output is deterministic.
Dataset generate_dataset(const DatasetSpec& spec);

struct SplitSpec {
  double base_fraction = 0.9;
  std::size_t shots = 5;
  std::uint64_t seed = 0;
};

struct Splits {
  Dataset base;
  Dataset support;
  Dataset query;
  std::vector<std::size_t> base_indices;     // into the training set
  std::vector<std::size_t> support_indices;  // into the training set
};

// Per class: shuffle, take round(base_fraction * count) as base, then `shots`
// support frames uniformly from the remainder. Query is the test set.
Splits split(const Dataset& train, const Dataset& test, const SplitSpec& spec);

// .sigds directory: manifest.json + iq.bin (f32le) + labels.bin (u16le) + snr.bin (i16le).
void save(const Dataset& ds, const std::filesystem::path& dir);
Dataset load(const std::filesystem::path& dir);

}  // namespace sigcl::sigdata
