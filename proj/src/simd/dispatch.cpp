#include <atomic>
#include <cstdlib>
#include <string_view>

#include "sigcl/simd/kernels.hpp"

namespace sigcl::simd {

const KernelTable* avx2_table_unchecked();

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select_default() {
  const char* env = std::getenv("SIGCL_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
  if (const KernelTable* t = avx2_kernels()) return *t;
  return scalar_kernels();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&select_default()};
  return slot;
}

}  // namespace

const KernelTable* avx2_kernels() {
  static const bool supported = cpu_has_avx2_fma();
  return supported ? avx2_table_unchecked() : nullptr;
}

const KernelTable& kernels() { return *active_slot().load(std::memory_order_acquire); }

void set_active_kernels(const KernelTable& table) {
  active_slot().store(&table, std::memory_order_release);
}

}  // namespace sigcl::simd
