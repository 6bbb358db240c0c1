#pragma once

#include <cstdint>

namespace bhsrs::kern {

// Flat float64 kernels underneath the tensor ops. Two implementations exist:
// a scalar reference and an AVX2 variant, selected once at startup.
//
// Contract: every elementwise kernel (add, sub, mul, scale, axpy, sqrt_ew,
// relu, add_scalar, mul_acc) produces bitwise-identical results across
// implementations -- the AVX2 code uses separate mul/add, never FMA, and
// never reassociates. The reductions (dot, sum) are allowed to reassociate
// and fuse for speed, so they only agree with the reference to rounding.
struct Kernels {
  double (*dot)(const double* a, const double* b, int64_t n);
  double (*sum)(const double* x, int64_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, int64_t n);
  void (*add)(const double* a, const double* b, double* out, int64_t n);
  void (*sub)(const double* a, const double* b, double* out, int64_t n);
  void (*mul)(const double* a, const double* b, double* out, int64_t n);
  // acc += a * b, elementwise
  void (*mul_acc)(const double* a, const double* b, double* acc, int64_t n);
  void (*scale)(double alpha, const double* x, double* out, int64_t n);
  void (*add_scalar)(double c, const double* x, double* out, int64_t n);
  void (*sqrt_ew)(const double* x, double* out, int64_t n);
  void (*relu)(const double* x, double* out, int64_t n);
  const char* name;
};

namespace scalar {
extern const Kernels kernels;
}
namespace avx2 {
// Null on non-x86 builds or when the compiler lacks AVX2 support.
extern const Kernels* kernels_or_null();
}

// Active implementation. Chosen on first use: AVX2 when the CPU supports
// avx2+fma, unless the BHSRS_SIMD environment variable forces a choice
// ("scalar" or "avx2"). Forcing avx2 on a CPU without it aborts selection
// with InputError.
const Kernels& active();

// For tests: override the active implementation. Passing nullptr re-runs
// the default selection.
void set_active(const Kernels* k);

inline double dot(const double* a, const double* b, int64_t n) { return active().dot(a, b, n); }
inline double sum(const double* x, int64_t n) { return active().sum(x, n); }
inline void axpy(double alpha, const double* x, double* y, int64_t n) { active().axpy(alpha, x, y, n); }
inline void add(const double* a, const double* b, double* out, int64_t n) { active().add(a, b, out, n); }
inline void sub(const double* a, const double* b, double* out, int64_t n) { active().sub(a, b, out, n); }
inline void mul(const double* a, const double* b, double* out, int64_t n) { active().mul(a, b, out, n); }
inline void mul_acc(const double* a, const double* b, double* acc, int64_t n) { active().mul_acc(a, b, acc, n); }
inline void scale(double alpha, const double* x, double* out, int64_t n) { active().scale(alpha, x, out, n); }
inline void add_scalar(double c, const double* x, double* out, int64_t n) { active().add_scalar(c, x, out, n); }
inline void sqrt_ew(const double* x, double* out, int64_t n) { active().sqrt_ew(x, out, n); }
inline void relu(const double* x, double* out, int64_t n) { active().relu(x, out, n); }

}  // namespace bhsrs::kern
