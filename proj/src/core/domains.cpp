#include "sigcl/domains.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "sigcl/errors.hpp"

namespace sigcl::domains {
namespace {

void check_iq(const Tensor& iq) {
  if (iq.rank() != 2 || iq.dim(0) != 2 || iq.dim(1) == 0)
    throw InvalidArgument("expected an IQ tensor of shape [2, N], got " + shape_string(iq.shape()));
}

// FFTW planning is not thread-safe; plans are created once per length under a
// lock and executed through the new-array interface.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan plan_for(std::size_t n) {
    std::lock_guard lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    fftw_complex* buf = fftw_alloc_complex(n);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    fftw_free(buf);
    plans_.emplace(n, p);
    return p;
  }

  ~PlanCache() {
    for (auto& [n, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mu_;
  std::map<std::size_t, fftw_plan> plans_;
};

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(fftw_alloc_complex(n)) {}
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* ptr;
};

std::size_t bin_of(double v, double extent, std::size_t bins) {
  const double pos = (v + extent) / (2.0 * extent) * static_cast<double>(bins);
  if (!(pos > 0.0)) return 0;  // also catches NaN
  const auto b = static_cast<std::size_t>(pos);
  return std::min(b, bins - 1);
}

}  // namespace

const char* domain_tag(Domain d) {
  switch (d) {
    case Domain::time: return "T";
    case Domain::freq: return "F";
    case Domain::constellation: return "C";
  }
  return "?";
}

void ConstellationSpec::validate() const {
  if (height < 8 || width < 8) throw InvalidArgument("ConstellationSpec: grid must be at least 8x8");
  if (!(extent > 0.0)) throw InvalidArgument("ConstellationSpec: extent must be positive");
}

Tensor to_frequency(const Tensor& iq, FreqRepr repr) {
  check_iq(iq);
  const std::size_t n = iq.dim(1);
  fftw_plan plan = PlanCache::instance().plan_for(n);
  FftwBuffer buf(n);
  for (std::size_t k = 0; k < n; ++k) {
    buf.ptr[k][0] = iq[k];
    buf.ptr[k][1] = iq[n + k];
  }
  fftw_execute_dft(plan, buf.ptr, buf.ptr);
  Tensor out({2, n});
  for (std::size_t k = 0; k < n; ++k) {
    const double re = buf.ptr[k][0];
    const double im = buf.ptr[k][1];
    if (repr == FreqRepr::magphase) {
      out[k] = static_cast<float>(std::hypot(re, im));
      out[n + k] = static_cast<float>(std::atan2(im, re));
    } else {
      out[k] = static_cast<float>(re);
      out[n + k] = static_cast<float>(im);
    }
  }
  return out;
}

Tensor constellation_counts(const Tensor& iq, const ConstellationSpec& spec) {
  check_iq(iq);
  spec.validate();
  const std::size_t n = iq.dim(1);
  double power = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    power += static_cast<double>(iq[k]) * iq[k] + static_cast<double>(iq[n + k]) * iq[n + k];
  const double rms = std::sqrt(power / static_cast<double>(n));
  const double g = rms > 0.0 ? 1.0 / rms : 1.0;
  Tensor grid({1, spec.height, spec.width});
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t x = bin_of(g * iq[k], spec.extent, spec.width);
    const std::size_t y = bin_of(g * iq[n + k], spec.extent, spec.height);
    grid[y * spec.width + x] += 1.0f;
  }
  return grid;
}

Tensor to_constellation(const Tensor& iq, const ConstellationSpec& spec) {
  Tensor grid = constellation_counts(iq, spec);
  auto v = grid.values();
  switch (spec.normalize) {
    case DensityNorm::count:
      break;
    case DensityNorm::log1p:
      for (float& x : v) x = std::log1p(x);
      break;
    case DensityNorm::max_one: {
      const float mx = *std::max_element(v.begin(), v.end());
      if (mx > 0.0f) for (float& x : v) x /= mx;
      break;
    }
    case DensityNorm::log1p_max: {
      for (float& x : v) x = std::log1p(x);
      const float mx = *std::max_element(v.begin(), v.end());
      if (mx > 0.0f) for (float& x : v) x /= mx;
      break;
    }
  }
  return grid;
}

DomainTriple to_triple(const Tensor& iq, const ConstellationSpec& spec, FreqRepr repr) {
  return DomainTriple{iq, to_frequency(iq, repr), to_constellation(iq, spec)};
}

}  // namespace sigcl::domains
