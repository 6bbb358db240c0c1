#include "bhsrs/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bhsrs/kernels.hpp"

namespace bhsrs {

SymEig jacobi_eigh(std::vector<double> a, int64_t n) {
  if (n < 1 || static_cast<int64_t>(a.size()) != n * n) {
    throw InputError(cat("jacobi_eigh: matrix size ", a.size(), " does not match n=", n));
  }
  std::vector<double> v(n * n, 0.0);
  for (int64_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  auto off_norm = [&] {
    double s = 0.0;
    for (int64_t p = 0; p < n; ++p)
      for (int64_t q = p + 1; q < n; ++q) s += a[p * n + q] * a[p * n + q];
    return std::sqrt(2.0 * s);
  };
  double total = 0.0;
  for (double x : a) total += x * x;
  const double stop = 1e-14 * std::max(std::sqrt(total), 1e-300);

  const int max_sweeps = 100;
  int sweep = 0;
  while (off_norm() > stop) {
    if (++sweep > max_sweeps) {
      throw InternalError("jacobi_eigh: no convergence after 100 sweeps");
    }
    for (int64_t p = 0; p < n; ++p) {
      for (int64_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // Rotate rows/columns p and q of A (symmetric update).
        for (int64_t i = 0; i < n; ++i) {
          const double aip = a[i * n + p];
          const double aiq = a[i * n + q];
          a[i * n + p] = c * aip - s * aiq;
          a[i * n + q] = s * aip + c * aiq;
        }
        for (int64_t i = 0; i < n; ++i) {
          const double api = a[p * n + i];
          const double aqi = a[q * n + i];
          a[p * n + i] = c * api - s * aqi;
          a[q * n + i] = s * api + c * aqi;
        }
        // Accumulate the rotation into the eigenvector matrix (columns).
        for (int64_t i = 0; i < n; ++i) {
          const double vip = v[i * n + p];
          const double viq = v[i * n + q];
          v[i * n + p] = c * vip - s * viq;
          v[i * n + q] = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int64_t x, int64_t y) { return a[x * n + x] > a[y * n + y]; });
  SymEig out;
  out.values.resize(n);
  out.vectors.resize(n * n);
  for (int64_t i = 0; i < n; ++i) {
    out.values[i] = a[order[i] * n + order[i]];
    for (int64_t j = 0; j < n; ++j) out.vectors[i * n + j] = v[j * n + order[i]];
  }
  return out;
}

PcaModel pca_fit(const std::vector<double>& data, int64_t n, int64_t c, double variance_target) {
  if (n < 2) throw InputError(cat("pca_fit: need at least 2 samples, got ", n));
  if (c < 1) throw InputError("pca_fit: need at least 1 column");
  if (static_cast<int64_t>(data.size()) != n * c) {
    throw InputError(cat("pca_fit: data size ", data.size(), " is not n*c = ", n * c));
  }
  if (!(variance_target > 0.0) || variance_target > 1.0) {
    throw InputError(cat("pca_fit: variance target must be in (0, 1], got ", variance_target));
  }

  PcaModel m;
  m.in_dim = c;
  m.mean.assign(c, 0.0);
  for (int64_t i = 0; i < n; ++i) {
    kern::axpy(1.0, data.data() + i * c, m.mean.data(), c);
  }
  for (double& x : m.mean) x /= static_cast<double>(n);

  // Upper-triangular covariance accumulation, mirrored at the end.
  std::vector<double> cov(c * c, 0.0);
  std::vector<double> centered(c);
  for (int64_t i = 0; i < n; ++i) {
    kern::sub(data.data() + i * c, m.mean.data(), centered.data(), c);
    for (int64_t j = 0; j < c; ++j) {
      if (centered[j] != 0.0) {
        kern::axpy(centered[j], centered.data() + j, cov.data() + j * c + j, c - j);
      }
    }
  }
  const double denom = static_cast<double>(n - 1);
  for (int64_t i = 0; i < c; ++i) {
    for (int64_t j = i; j < c; ++j) {
      cov[i * c + j] /= denom;
      cov[j * c + i] = cov[i * c + j];
    }
  }

  SymEig eig = jacobi_eigh(std::move(cov), c);
  m.eigenvalues.resize(c);
  double total = 0.0;
  for (int64_t i = 0; i < c; ++i) {
    m.eigenvalues[i] = std::max(eig.values[i], 0.0);  // clamp rounding negatives
    total += m.eigenvalues[i];
  }
  m.explained_ratio.assign(c, 0.0);
  // Variance at the level of accumulated rounding error (~eps^2 * scale^2
  // per covariance entry) counts as zero: centering a constant column
  // leaves residuals of one ulp, not real signal.
  double scale2 = 0.0;
  for (double x : data) scale2 += x * x;
  scale2 /= static_cast<double>(n * c);
  if (total <= scale2 * 1e-26) {
    m.degenerate = true;
    m.k = 0;
    warn("pca_fit: input has zero variance; no components retained");
    return m;
  }
  for (int64_t i = 0; i < c; ++i) m.explained_ratio[i] = m.eigenvalues[i] / total;

  double cum = 0.0;
  int64_t k = c;
  for (int64_t i = 0; i < c; ++i) {
    cum += m.explained_ratio[i];
    if (cum >= variance_target * (1.0 - 1e-12)) {
      k = i + 1;
      break;
    }
  }
  m.k = k;
  m.components.resize(k * c);
  for (int64_t i = 0; i < k; ++i) {
    const double* src = eig.vectors.data() + i * c;
    double* dst = m.components.data() + i * c;
    // Orient so the largest-magnitude coordinate is positive.
    int64_t arg = 0;
    for (int64_t j = 1; j < c; ++j) {
      if (std::fabs(src[j]) > std::fabs(src[arg])) arg = j;
    }
    const double flip = src[arg] < 0.0 ? -1.0 : 1.0;
    kern::scale(flip, src, dst, c);
  }
  return m;
}

void pca_project(const PcaModel& m, const double* row, double* out) {
  std::vector<double> centered(m.in_dim);
  kern::sub(row, m.mean.data(), centered.data(), m.in_dim);
  for (int64_t i = 0; i < m.k; ++i) {
    out[i] = kern::dot(m.components.data() + i * m.in_dim, centered.data(), m.in_dim);
  }
}

void pca_reconstruct(const PcaModel& m, const double* proj, double* out) {
  std::copy(m.mean.begin(), m.mean.end(), out);
  for (int64_t i = 0; i < m.k; ++i) {
    kern::axpy(proj[i], m.components.data() + i * m.in_dim, out, m.in_dim);
  }
}

std::vector<double> pca_project_all(const PcaModel& m, const std::vector<double>& data,
                                    int64_t n) {
  if (static_cast<int64_t>(data.size()) != n * m.in_dim) {
    throw InputError(cat("pca_project_all: data size ", data.size(), " is not n*in_dim = ",
                         n * m.in_dim));
  }
  std::vector<double> out(n * m.k);
  parallel_for(n, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      pca_project(m, data.data() + i * m.in_dim, out.data() + i * m.k);
    }
  });
  return out;
}

}  // namespace bhsrs
