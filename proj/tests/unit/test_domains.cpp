#include <doctest.h>

#include <cmath>
#include <complex>

#include "sigcl/domains.hpp"
#include "sigcl/rng.hpp"
#include "sigcl/sigdata.hpp"

using namespace sigcl;
using namespace sigcl::domains;

namespace {

Tensor random_iq(std::size_t n, Rng& rng) {
  Tensor t({2, n});
  for (float& v : t.values()) v = static_cast<float>(standard_normal(rng));
  return t;
}

std::vector<std::complex<double>> direct_dft(const Tensor& iq) {
  const std::size_t n = iq.dim(1);
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n);
      acc += std::complex<double>(iq[t], iq[n + t]) * std::polar(1.0, ang);
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("frequency view matches a direct DFT") {
  Rng rng = make_rng(5);
  for (std::size_t n : {16, 64, 128}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor x = random_iq(n, rng);
      const auto ref = direct_dft(x);
      const Tensor ri = to_frequency(x, FreqRepr::reim);
      const Tensor mp = to_frequency(x, FreqRepr::magphase);
      for (std::size_t k = 0; k < n; ++k) {
        const double scale = std::max(1.0, std::abs(ref[k]));
        CHECK(std::abs(ri[k] - ref[k].real()) / scale < 1e-5);
        CHECK(std::abs(ri[n + k] - ref[k].imag()) / scale < 1e-5);
        CHECK(std::abs(mp[k] - std::abs(ref[k])) / scale < 1e-5);
      }
    }
  }
}

TEST_CASE("Parseval holds") {
  Rng rng = make_rng(6);
  const Tensor x = random_iq(128, rng);
  const Tensor mp = to_frequency(x);
  double et = 0.0, ef = 0.0;
  for (float v : x.values()) et += double(v) * v;
  for (std::size_t k = 0; k < 128; ++k) ef += double(mp[k]) * mp[k];
  CHECK(ef / 128.0 == doctest::Approx(et).epsilon(1e-5));
}

TEST_CASE("a pure tone lands in one bin") {
  const std::size_t n = 64;
  Tensor x({2, n});
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = static_cast<float>(std::cos(2 * M_PI * 5 * t / n));
    x[n + t] = static_cast<float>(std::sin(2 * M_PI * 5 * t / n));
  }
  const Tensor mp = to_frequency(x);
  for (std::size_t k = 0; k < n; ++k) CHECK(mp[k] == doctest::Approx(k == 5 ? 64.0 : 0.0).epsilon(1e-4).scale(1.0));
}

TEST_CASE("constellation counts cover every sample") {
  Rng rng = make_rng(7);
  const Tensor x = random_iq(128, rng);
  ConstellationSpec spec;
  const Tensor c = constellation_counts(x, spec);
  REQUIRE(c.shape() == std::vector<std::size_t>{1, 64, 64});
  double total = 0.0;
  for (float v : c.values()) total += v;
  CHECK(total == 128.0);
}

TEST_CASE("constellation axes: I to columns, Q to rows") {
  Tensor x({2, 8});
  for (std::size_t t = 0; t < 8; ++t) {
    x[t] = 1.0f;      // I
    x[8 + t] = 0.0f;  // Q
  }
  ConstellationSpec spec{8, 8, 2.0, DensityNorm::count};
  const Tensor c = constellation_counts(x, spec);
  double col_mass_right = 0.0;
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t col = 4; col < 8; ++col) col_mass_right += c[r * 8 + col];
  CHECK(col_mass_right == 8.0);
}

TEST_CASE("density normalizations") {
  Rng rng = make_rng(8);
  const Tensor x = random_iq(128, rng);
  ConstellationSpec s;
  s.normalize = DensityNorm::max_one;
  float mx = 0;
  for (float v : to_constellation(x, s).values()) mx = std::max(mx, v);
  CHECK(mx == doctest::Approx(1.0f));
  s.normalize = DensityNorm::log1p_max;
  mx = 0;
  for (float v : to_constellation(x, s).values()) {
    CHECK(v >= 0.0f);
    mx = std::max(mx, v);
  }
  CHECK(mx == doctest::Approx(1.0f));
  ConstellationSpec bad;
  bad.extent = 0.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("triple bundles the three views") {
  Rng rng = make_rng(9);
  const Tensor x = random_iq(64, rng);
  const DomainTriple t = to_triple(x, ConstellationSpec{});
  CHECK(t.time == x);
  CHECK(t.freq.shape() == std::vector<std::size_t>{2, 64});
  CHECK(t.constellation.shape() == std::vector<std::size_t>{1, 64, 64});
  CHECK(std::string(domain_tag(Domain::constellation)) == "C");
  CHECK_THROWS(to_frequency(Tensor({3, 8})));
}
