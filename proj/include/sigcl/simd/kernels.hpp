#pragma once

// Data-parallel inner loops used by the network layers, the optimizer and
// k-means. Every kernel has a portable scalar reference; an AVX2+FMA variant
// is selected at runtime when the CPU supports it. Both variants are kept
// callable so the test suite can check them against each other.

#include <cstddef>
#include <string_view>

namespace sigcl::simd {

struct AdamStep {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float bias_correction1 = 1.0f;  // 1 - beta1^t
  float bias_correction2 = 1.0f;  // 1 - beta2^t
};

struct KernelTable {
  std::string_view name;

  // sum_i a[i] * b[i]
  float (*dot)(const float* a, const float* b, std::size_t n);
  // sum_i (a[i] - b[i])^2
  float (*squared_distance)(const float* a, const float* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
  // y = alpha * y + beta * x
  void (*blend)(float alpha, float* y, float beta, const float* x, std::size_t n);
  // y = max(x, 0)
  void (*relu_forward)(const float* x, float* y, std::size_t n);
  // gx = x > 0 ? gy : 0
  void (*relu_backward)(const float* x, const float* gy, float* gx, std::size_t n);
  // Row-major C[m x n] (+)= A[m x k] * B[k x n].
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
               const float* b, std::size_t ldb, float* c, std::size_t ldc, bool accumulate);
  // In-place Adam update of one parameter block.
  void (*adam)(float* w, const float* g, float* m, float* v, std::size_t n, const AdamStep& step);
};

const KernelTable& scalar_kernels();

// Returns nullptr when the build or the CPU has no AVX2+FMA support.
const KernelTable* avx2_kernels();

// The table used by the library. AVX2 when available unless the environment
// variable SIGCL_SIMD is set to "scalar".
const KernelTable& kernels();

// Overrides the active table (tests and benchmarks).
void set_active_kernels(const KernelTable& table);

}  // namespace sigcl::simd
