#include <doctest.h>

#include <cmath>
#include <vector>

#include "sigcl/rng.hpp"
#include "sigcl/simd/kernels.hpp"

using namespace sigcl;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(uniform(rng, -2.0, 2.0));
  return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, float tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::fabs(a[i] - b[i]) <= tol * (1.0f + std::fabs(a[i])));
}

const std::size_t kSizes[] = {0, 1, 3, 7, 8, 9, 15, 16, 17, 31, 64, 100, 257};

}  // namespace

TEST_CASE("dispatch honours overrides") {
  const auto& s = simd::scalar_kernels();
  CHECK(s.name == "scalar");
  const simd::KernelTable& before = simd::kernels();
  simd::set_active_kernels(s);
  CHECK(&simd::kernels() == &s);
  simd::set_active_kernels(before);
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const simd::KernelTable* v = simd::avx2_kernels();
  if (!v) {
    MESSAGE("no AVX2 on this machine; equivalence not exercised");
    return;
  }
  const auto& s = simd::scalar_kernels();
  Rng rng = make_rng(7);

  SUBCASE("reductions") {
    for (std::size_t n : kSizes) {
      auto a = random_vec(n, rng), b = random_vec(n, rng);
      CHECK(v->dot(a.data(), b.data(), n) == doctest::Approx(s.dot(a.data(), b.data(), n)).epsilon(1e-5));
      CHECK(v->squared_distance(a.data(), b.data(), n) ==
            doctest::Approx(s.squared_distance(a.data(), b.data(), n)).epsilon(1e-5));
    }
  }
  SUBCASE("elementwise") {
    for (std::size_t n : kSizes) {
      auto x = random_vec(n, rng), y = random_vec(n, rng), g = random_vec(n, rng);
      auto y1 = y, y2 = y;
      s.axpy(0.37f, x.data(), y1.data(), n);
      v->axpy(0.37f, x.data(), y2.data(), n);
      check_close(y1, y2, 1e-6f);
      y1 = y, y2 = y;
      s.blend(0.995f, y1.data(), 0.005f, x.data(), n);
      v->blend(0.995f, y2.data(), 0.005f, x.data(), n);
      check_close(y1, y2, 1e-6f);
      std::vector<float> r1(n), r2(n);
      s.relu_forward(x.data(), r1.data(), n);
      v->relu_forward(x.data(), r2.data(), n);
      CHECK(r1 == r2);
      s.relu_backward(x.data(), g.data(), r1.data(), n);
      v->relu_backward(x.data(), g.data(), r2.data(), n);
      CHECK(r1 == r2);
    }
  }
  SUBCASE("gemm with strides and accumulation") {
    for (std::size_t m : {1, 5, 16}) {
      for (std::size_t n : {1, 7, 8, 33}) {
        for (std::size_t k : {1, 9, 40}) {
          const std::size_t lda = k + 3, ldb = n + 2, ldc = n + 1;
          auto a = random_vec(m * lda, rng), b = random_vec(k * ldb, rng), c = random_vec(m * ldc, rng);
          for (bool acc : {false, true}) {
            auto c1 = c, c2 = c;
            s.gemm(m, n, k, a.data(), lda, b.data(), ldb, c1.data(), ldc, acc);
            v->gemm(m, n, k, a.data(), lda, b.data(), ldb, c2.data(), ldc, acc);
            check_close(c1, c2, 1e-4f);
          }
        }
      }
    }
  }
  SUBCASE("adam") {
    for (std::size_t n : kSizes) {
      auto w = random_vec(n, rng), g = random_vec(n, rng), m = random_vec(n, rng), sq = random_vec(n, rng);
      for (auto& x : sq) x = std::fabs(x);
      simd::AdamStep st{1e-3f, 0.9f, 0.999f, 1e-8f, 0.19f, 0.002f};
      auto w1 = w, m1 = m, v1 = sq, w2 = w, m2 = m, v2 = sq;
      s.adam(w1.data(), g.data(), m1.data(), v1.data(), n, st);
      v->adam(w2.data(), g.data(), m2.data(), v2.data(), n, st);
      check_close(w1, w2, 1e-5f);
      check_close(m1, m2, 1e-6f);
      check_close(v1, v2, 1e-6f);
    }
  }
}

TEST_CASE("scalar gemm matches a naive triple loop") {
  Rng rng = make_rng(3);
  const std::size_t m = 4, n = 6, k = 5;
  auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
  std::vector<float> c(m * n, 0.0f);
  simd::scalar_kernels().gemm(m, n, k, a.data(), k, b.data(), n, c.data(), n, false);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double ref = 0.0;
      for (std::size_t p = 0; p < k; ++p) ref += double(a[i * k + p]) * b[p * n + j];
      CHECK(c[i * n + j] == doctest::Approx(ref).epsilon(1e-5));
    }
}
