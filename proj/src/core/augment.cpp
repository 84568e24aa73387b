#include "sigcl/augment.hpp"

#include <algorithm>
#include <cmath>

#include "sigcl/errors.hpp"

namespace sigcl::augment {
namespace {

void check_rows(const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) == 0) throw InvalidArgument("augment: expected [R, N], got " + shape_string(x.shape()));
}

void check_grid(const Tensor& g) {
  if (g.rank() != 3 || g.dim(0) != 1) throw InvalidArgument("augment: expected [1, H, W], got " + shape_string(g.shape()));
}

// Linear resample of src (len n) onto m points spanning the same interval.
void resample(const float* src, std::size_t n, float* dst, std::size_t m) {
  if (m == 1 || n == 1) {
    std::fill(dst, dst + m, src[0]);
    return;
  }
  const double step = static_cast<double>(n - 1) / static_cast<double>(m - 1);
  for (std::size_t i = 0; i < m; ++i) {
    const double t = static_cast<double>(i) * step;
    auto lo = static_cast<std::size_t>(t);
    if (lo >= n - 1) {
      dst[i] = src[n - 1];
      continue;
    }
    const double frac = t - static_cast<double>(lo);
    dst[i] = frac == 0.0 ? src[lo]
                         : static_cast<float>((1.0 - frac) * src[lo] + frac * src[lo + 1]);
  }
}

std::size_t resampled_length(std::size_t n, double gamma) {
  const auto m = static_cast<long long>(std::llround(gamma * static_cast<double>(n)));
  if (m < 2) throw InvalidArgument("interpolate: round(gamma * N) must be at least 2");
  return static_cast<std::size_t>(m);
}

}  // namespace

const char* aug_name(AugKind k) {
  switch (k) {
    case AugKind::noise: return "noise";
    case AugKind::shift: return "shift";
    case AugKind::scale: return "scale";
    case AugKind::dropout: return "dropout";
    case AugKind::interpolate: return "interpolate";
  }
  return "?";
}

AugAction AugAction::constant(double v) {
  AugAction act;
  act.a.fill(v);
  return act;
}

void AugAction::validate() const {
  for (const double v : a)
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("AugAction: components must lie in [0, 1]");
}

void AugRanges::validate() const {
  if (sigma_max < 0 || shift_frac_max < 0 || dropout_p_max < 0 || dropout_p_max >= 1)
    throw InvalidArgument("AugRanges: negative or out-of-range maxima");
  if (!(scale_min > 0 && scale_min <= 1 && scale_max >= 1))
    throw InvalidArgument("AugRanges: scale range must contain 1");
  if (!(gamma_min > 0 && gamma_min <= 1 && gamma_max >= 1))
    throw InvalidArgument("AugRanges: gamma range must contain 1");
}

AugParams map_action(const AugAction& action, const AugRanges& r, std::size_t n) {
  action.validate();
  r.validate();
  AugParams p;
  p.sigma = action[0] * r.sigma_max;
  p.shift_max = static_cast<std::size_t>(std::floor(action[1] * r.shift_frac_max * static_cast<double>(n)));
  p.scale_lo = 1.0 - action[2] * (1.0 - r.scale_min);
  p.scale_hi = 1.0 + action[2] * (r.scale_max - 1.0);
  p.dropout_p = action[3] * r.dropout_p_max;
  p.gamma_lo = 1.0 - action[4] * (1.0 - r.gamma_min);
  p.gamma_hi = 1.0 + action[4] * (r.gamma_max - 1.0);
  return p;
}

Tensor add_noise(const Tensor& x, double sigma, Rng& rng) {
  if (sigma < 0.0) throw InvalidArgument("add_noise: sigma must be non-negative");
  Tensor y = x;
  if (sigma == 0.0) return y;
  for (float& v : y.values()) v = static_cast<float>(v + sigma * standard_normal(rng));
  return y;
}

Tensor time_shift(const Tensor& x, long delta) {
  check_rows(x);
  const std::size_t rows = x.dim(0), n = x.dim(1);
  const auto nn = static_cast<long>(n);
  if (delta > nn || delta < -nn) throw InvalidArgument("time_shift: |delta| must not exceed N");
  const auto off = static_cast<std::size_t>(((delta % nn) + nn) % nn);
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < n; ++i) y[r * n + i] = x[r * n + (i + off) % n];
  return y;
}

Tensor scale(const Tensor& x, double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("scale: alpha must be positive");
  Tensor y = x;
  if (alpha == 1.0) return y;
  const auto a = static_cast<float>(alpha);
  for (float& v : y.values()) v *= a;
  return y;
}

Tensor random_dropout(const Tensor& x, double p, Rng& rng) {
  check_rows(x);
  if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("random_dropout: p must be in [0, 1)");
  Tensor y = x;
  if (p == 0.0) return y;
  const std::size_t rows = x.dim(0), n = x.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    if (uniform01(rng) < p)
      for (std::size_t r = 0; r < rows; ++r) y[r * n + i] = 0.0f;
  }
  return y;
}

Tensor interpolate(const Tensor& x, double gamma) {
  check_rows(x);
  const std::size_t rows = x.dim(0), n = x.dim(1);
  const std::size_t m = resampled_length(n, gamma);
  if (m == n) return x;
  Tensor y(x.shape());
  std::vector<float> mid(m);
  for (std::size_t r = 0; r < rows; ++r) {
    resample(x.data() + r * n, n, mid.data(), m);
    resample(mid.data(), m, y.data() + r * n, n);
  }
  return y;
}

Tensor grid_noise(const Tensor& g, double sigma, Rng& rng) {
  check_grid(g);
  if (sigma < 0.0) throw InvalidArgument("grid_noise: sigma must be non-negative");
  Tensor y = g;
  if (sigma == 0.0) return y;
  for (float& v : y.values()) v = std::max(0.0f, static_cast<float>(v + sigma * standard_normal(rng)));
  return y;
}

Tensor grid_roll(const Tensor& g, long dy, long dx) {
  check_grid(g);
  const std::size_t h = g.dim(1), w = g.dim(2);
  const auto hh = static_cast<long>(h), ww = static_cast<long>(w);
  const auto oy = static_cast<std::size_t>(((dy % hh) + hh) % hh);
  const auto ox = static_cast<std::size_t>(((dx % ww) + ww) % ww);
  if (oy == 0 && ox == 0) return g;
  Tensor y(g.shape());
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) y[((r + oy) % h) * w + (c + ox) % w] = g[r * w + c];
  return y;
}

Tensor grid_dropout(const Tensor& g, double p, Rng& rng) {
  check_grid(g);
  if (!(p >= 0.0 && p < 1.0)) throw InvalidArgument("grid_dropout: p must be in [0, 1)");
  Tensor y = g;
  if (p == 0.0) return y;
  for (float& v : y.values())
    if (uniform01(rng) < p) v = 0.0f;
  return y;
}

Tensor grid_interpolate(const Tensor& g, double gamma) {
  check_grid(g);
  const std::size_t h = g.dim(1), w = g.dim(2);
  const std::size_t mh = resampled_length(h, gamma), mw = resampled_length(w, gamma);
  if (mh == h && mw == w) return g;
  // Separable bilinear: rows first, then columns, down and back up.
  auto bilinear = [](const std::vector<float>& src, std::size_t sh, std::size_t sw, std::size_t dh,
                     std::size_t dw) {
    std::vector<float> tmp(sh * dw), out(dh * dw), col_in(sh), col_out(dh);
    for (std::size_t r = 0; r < sh; ++r) resample(src.data() + r * sw, sw, tmp.data() + r * dw, dw);
    for (std::size_t c = 0; c < dw; ++c) {
      for (std::size_t r = 0; r < sh; ++r) col_in[r] = tmp[r * dw + c];
      resample(col_in.data(), sh, col_out.data(), dh);
      for (std::size_t r = 0; r < dh; ++r) out[r * dw + c] = col_out[r];
    }
    return out;
  };
  const auto mid = bilinear(g.storage(), h, w, mh, mw);
  return Tensor(g.shape(), bilinear(mid, mh, mw, h, w));
}

domains::DomainTriple augment_triple(const domains::DomainTriple& t, const AugAction& action,
                                     const AugRanges& ranges, Rng& rng, const AugMask& enabled) {
  check_rows(t.time);
  check_rows(t.freq);
  check_grid(t.constellation);
  std::array<AugKind, kNumAugKinds> pool{};
  std::size_t count = 0;
  for (std::size_t k = 0; k < kNumAugKinds; ++k)
    if (enabled[k]) pool[count++] = static_cast<AugKind>(k);
  if (count == 0) return t;

  const std::size_t n = t.time.dim(1);
  const AugParams p = map_action(action, ranges, n);
  const AugKind kind = pool[uniform_index(rng, count)];
  domains::DomainTriple out;
  switch (kind) {
    case AugKind::noise:
      out.time = add_noise(t.time, p.sigma, rng);
      out.freq = add_noise(t.freq, p.sigma, rng);
      out.constellation = grid_noise(t.constellation, p.sigma, rng);
      break;
    case AugKind::shift: {
      const auto span = static_cast<long>(p.shift_max);
      const long delta = static_cast<long>(uniform_index(rng, static_cast<std::uint64_t>(2 * span + 1))) - span;
      out.time = time_shift(t.time, delta);
      out.freq = time_shift(t.freq, delta);
      const std::size_t h = t.constellation.dim(1), w = t.constellation.dim(2);
      const long dy = std::lround(static_cast<double>(delta) * static_cast<double>(h) / static_cast<double>(n));
      const long dx = std::lround(static_cast<double>(delta) * static_cast<double>(w) / static_cast<double>(n));
      out.constellation = grid_roll(t.constellation, dy, dx);
      break;
    }
    case AugKind::scale: {
      const double alpha = p.scale_lo == p.scale_hi ? p.scale_lo : uniform(rng, p.scale_lo, p.scale_hi);
      out.time = scale(t.time, alpha);
      out.freq = scale(t.freq, alpha);
      out.constellation = scale(t.constellation, alpha);
      break;
    }
    case AugKind::dropout:
      out.time = random_dropout(t.time, p.dropout_p, rng);
      out.freq = random_dropout(t.freq, p.dropout_p, rng);
      out.constellation = grid_dropout(t.constellation, p.dropout_p, rng);
      break;
    case AugKind::interpolate: {
      const double gamma = p.gamma_lo == p.gamma_hi ? p.gamma_lo : uniform(rng, p.gamma_lo, p.gamma_hi);
      out.time = interpolate(t.time, gamma);
      out.freq = interpolate(t.freq, gamma);
      out.constellation = grid_interpolate(t.constellation, gamma);
      break;
    }
  }
  return out;
}

}  // namespace sigcl::augment
