#include <atomic>
#include <cstdlib>
#include <string>

#include "bhsrs/common.hpp"
#include "bhsrs/kernels.hpp"

namespace bhsrs::kern {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* select() {
  const char* forced = std::getenv("BHSRS_SIMD");
  if (forced != nullptr && *forced != '\0') {
    std::string want(forced);
    if (want == "scalar") return &scalar::kernels;
    if (want == "avx2") {
      const Kernels* k = avx2::kernels_or_null();
      if (k == nullptr || !cpu_has_avx2_fma()) {
        throw InputError("BHSRS_SIMD=avx2 but this build/CPU does not support AVX2+FMA");
      }
      return k;
    }
    throw InputError(cat("BHSRS_SIMD must be 'scalar' or 'avx2', got '", want, "'"));
  }
  if (cpu_has_avx2_fma()) {
    if (const Kernels* k = avx2::kernels_or_null()) return k;
  }
  return &scalar::kernels;
}

std::atomic<const Kernels*> g_active{nullptr};

}  // namespace

const Kernels& active() {
  const Kernels* k = g_active.load(std::memory_order_acquire);
  if (k == nullptr) {
    k = select();
    g_active.store(k, std::memory_order_release);
  }
  return *k;
}

void set_active(const Kernels* k) { g_active.store(k, std::memory_order_release); }

}  // namespace bhsrs::kern
