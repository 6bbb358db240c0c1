#include <cmath>

#include "bhsrs/kernels.hpp"

namespace bhsrs::kern::scalar {
namespace {

double dot_(const double* a, const double* b, int64_t n) {
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double sum_(const double* x, int64_t n) {
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void axpy_(double alpha, const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_(const double* a, const double* b, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_(const double* a, const double* b, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_(const double* a, const double* b, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void mul_acc_(const double* a, const double* b, double* acc, int64_t n) {
  for (int64_t i = 0; i < n; ++i) acc[i] += a[i] * b[i];
}

void scale_(double alpha, const double* x, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void add_scalar_(double c, const double* x, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = c + x[i];
}

void sqrt_ew_(const double* x, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = std::sqrt(x[i]);
}

void relu_(const double* x, double* out, int64_t n) {
  for (int64_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

}  // namespace

const Kernels kernels = {
    dot_, sum_, axpy_, add_, sub_, mul_, mul_acc_, scale_, add_scalar_, sqrt_ew_, relu_, "scalar",
};

}  // namespace bhsrs::kern::scalar
