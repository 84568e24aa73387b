#pragma once

// Time, frequency and constellation views of an IQ frame.

#include <cstddef>

#include "sigcl/tensor.hpp"

namespace sigcl::domains {

enum class Domain { time = 0, freq = 1, constellation = 2 };
constexpr std::size_t kNumDomains = 3;
const char* domain_tag(Domain d);  // "T", "F", "C"

// magphase: rows are |X[k]| and atan2(Im, Re). reim: rows are Re(X[k]), Im(X[k]).
enum class FreqRepr { magphase, reim };

enum class DensityNorm { count, log1p, max_one, log1p_max };

struct ConstellationSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  double extent = 3.0;  // axes span [-extent, extent] after RMS normalization
  DensityNorm normalize = DensityNorm::log1p_max;

  void validate() const;
};

struct DomainTriple {
  Tensor time;           // [2, N]
  Tensor freq;           // [2, N]
  Tensor constellation;  // [1, H, W]

  bool operator==(const DomainTriple&) const = default;
};

// DFT over k = 0..N-1 of x[n] = I[n] + jQ[n].
Tensor to_frequency(const Tensor& iq, FreqRepr repr = FreqRepr::magphase);

// Raw per-bin hit counts (sum == N), x axis from I, y axis (rows) from Q.
Tensor constellation_counts(const Tensor& iq, const ConstellationSpec& spec);
Tensor to_constellation(const Tensor& iq, const ConstellationSpec& spec);

DomainTriple to_triple(const Tensor& iq, const ConstellationSpec& spec,
                       FreqRepr repr = FreqRepr::magphase);

}  // namespace sigcl::domains
