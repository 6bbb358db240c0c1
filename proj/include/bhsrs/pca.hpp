#pragma once

#include <cstdint>
#include <vector>

#include "bhsrs/common.hpp"

namespace bhsrs {

// Eigendecomposition of a dense symmetric matrix (row-major, n x n) by
// cyclic Jacobi rotations. Returns eigenpairs sorted by descending value;
// vectors[i*n..i*n+n) is the unit eigenvector for values[i].
struct SymEig {
  std::vector<double> values;
  std::vector<double> vectors;
};
SymEig jacobi_eigh(std::vector<double> a, int64_t n);

struct PcaModel {
  int64_t in_dim = 0;
  int64_t k = 0;  // retained components
  std::vector<double> mean;        // [in_dim]
  std::vector<double> components;  // [k][in_dim], rows are unit vectors
  std::vector<double> eigenvalues;       // all in_dim, descending, clamped >= 0
  std::vector<double> explained_ratio;   // eigenvalues / their sum
  bool degenerate = false;  // true when total variance was zero (k == 0)
};

// Fits mean + principal axes on rows of data (n x c, row-major) and keeps
// the smallest k whose cumulative explained variance reaches
// variance_target (in (0, 1]). Sample covariance uses the n-1 denominator.
// Sign convention: each component's largest-magnitude coordinate is
// positive, so the decomposition is reproducible across eigensolvers.
PcaModel pca_fit(const std::vector<double>& data, int64_t n, int64_t c, double variance_target);

// Projects one row (length in_dim) onto the k components.
void pca_project(const PcaModel& m, const double* row, double* out);
// Back-projection: mean + sum_i proj[i] * component_i.
void pca_reconstruct(const PcaModel& m, const double* proj, double* out);

// All rows at once: out is n x k.
std::vector<double> pca_project_all(const PcaModel& m, const std::vector<double>& data, int64_t n);

}  // namespace bhsrs
