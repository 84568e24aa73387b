#pragma once

// The five parameterized augmentations, their constellation-grid analogues,
// and the action -> parameter mapping shared by all three domains.

#include <array>
#include <cstddef>

#include "sigcl/domains.hpp"
#include "sigcl/rng.hpp"
#include "sigcl/tensor.hpp"

namespace sigcl::augment {

enum class AugKind { noise = 0, shift = 1, scale = 2, dropout = 3, interpolate = 4 };
constexpr std::size_t kNumAugKinds = 5;
const char* aug_name(AugKind k);

// Intensities in [0, 1], ordered (noise, shift, scale, dropout, interpolate).
struct AugAction {
  std::array<double, kNumAugKinds> a{};

  static AugAction zero() { return {}; }
  static AugAction constant(double v);
  void validate() const;
  double operator[](std::size_t i) const { return a[i]; }
};

struct AugRanges {
  double sigma_max = 0.2;
  double shift_frac_max = 0.25;
  double scale_min = 0.5;
  double scale_max = 1.5;
  double dropout_p_max = 0.3;
  double gamma_min = 0.8;
  double gamma_max = 1.25;

  void validate() const;
};

// Concrete parameters for one action. Random draws (shift, scale factor,
// interpolation factor) happen per sample inside the intervals below.
struct AugParams {
  double sigma = 0.0;
  std::size_t shift_max = 0;
  double scale_lo = 1.0, scale_hi = 1.0;
  double dropout_p = 0.0;
  double gamma_lo = 1.0, gamma_hi = 1.0;
};

AugParams map_action(const AugAction& action, const AugRanges& ranges, std::size_t n);

// Subset of augmentation kinds that augment_triple may pick from.
using AugMask = std::array<bool, kNumAugKinds>;
constexpr AugMask kAllAugs{true, true, true, true, true};

// Signal-domain operations on [R, N] tensors (row-wise).
Tensor add_noise(const Tensor& x, double sigma, Rng& rng);
Tensor time_shift(const Tensor& x, long delta);
Tensor scale(const Tensor& x, double alpha);
// Zeroes whole columns; one Bernoulli(1 - p) keep flag per time index.
Tensor random_dropout(const Tensor& x, double p, Rng& rng);
// Linear resample of each row to round(gamma * N) points and back to N.
Tensor interpolate(const Tensor& x, double gamma);

// Grid analogues on [1, H, W] tensors; outputs stay >= 0.
Tensor grid_noise(const Tensor& g, double sigma, Rng& rng);
Tensor grid_roll(const Tensor& g, long dy, long dx);
Tensor grid_dropout(const Tensor& g, double p, Rng& rng);
Tensor grid_interpolate(const Tensor& g, double gamma);

// Picks one enabled kind uniformly per call and applies it to all three views
// with a shared intensity draw.
domains::DomainTriple augment_triple(const domains::DomainTriple& triple, const AugAction& action,
                                     const AugRanges& ranges, Rng& rng,
                                     const AugMask& enabled = kAllAugs);

}  // namespace sigcl::augment
