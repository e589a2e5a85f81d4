#include <atomic>
#include <cstdlib>
#include <string>

#include "otbp/errors.hpp"
#include "otbp/kernels/kernels.hpp"

namespace otbp::kernels {

#ifdef OTBP_HAVE_AVX2_KERNELS
const KernelTable& avx2_table();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(OTBP_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  if (const char* forced = std::getenv("OTBP_SIMD")) {
    const std::string name(forced);
    if (name == "scalar") return &scalar_table();
    if (name == "avx2" && backend_supported(Backend::avx2)) return &table(Backend::avx2);
  }
  return backend_supported(Backend::avx2) ? &table(Backend::avx2) : &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{initial_table()};
  return ptr;
}

}  // namespace

bool backend_supported(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
      return cpu_has_avx2();
  }
  return false;
}

const KernelTable& table(Backend backend) {
  if (!backend_supported(backend))
    throw ValidationError("SIMD backend not supported on this CPU: " +
                          std::string(backend_name(backend)));
#ifdef OTBP_HAVE_AVX2_KERNELS
  if (backend == Backend::avx2) return avx2_table();
#endif
  return scalar_table();
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select_backend(Backend backend) {
  current().store(&table(backend), std::memory_order_release);
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::avx2 ? "avx2" : "scalar";
}

}  // namespace otbp::kernels
