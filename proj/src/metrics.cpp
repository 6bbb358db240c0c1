#include "bhsrs/metrics.hpp"

#include "bhsrs/common.hpp"

namespace bhsrs {

int64_t Confusion::total() const {
  int64_t n = 0;
  for (int64_t v : counts) n += v;
  return n;
}

Confusion confusion_matrix(const std::vector<int32_t>& reference,
                           const std::vector<int32_t>& predicted, int64_t n_classes) {
  if (n_classes < 1) throw InputError("metrics: need at least one class");
  if (reference.size() != predicted.size()) {
    throw InputError(cat("metrics: ", reference.size(), " reference labels vs ",
                         predicted.size(), " predictions"));
  }
  if (reference.empty()) throw InputError("metrics: no samples");
  Confusion c;
  c.n_classes = n_classes;
  c.counts.assign(static_cast<size_t>(n_classes * n_classes), 0);
  for (size_t i = 0; i < reference.size(); ++i) {
    const int32_t r = reference[i], p = predicted[i];
    if (r < 0 || r >= n_classes || p < 0 || p >= n_classes) {
      throw InputError(cat("metrics: label pair (", r, ", ", p, ") outside [0, ",
                           n_classes, ")"));
    }
    ++c.at(r, p);
  }
  return c;
}

double overall_accuracy(const Confusion& c) {
  const int64_t n = c.total();
  if (n == 0) throw InputError("metrics: empty confusion matrix");
  int64_t diag = 0;
  for (int64_t k = 0; k < c.n_classes; ++k) diag += c.at(k, k);
  return static_cast<double>(diag) / static_cast<double>(n);
}

double average_accuracy(const Confusion& c) {
  if (c.total() == 0) throw InputError("metrics: empty confusion matrix");
  double sum = 0.0;
  int64_t present = 0;
  for (int64_t k = 0; k < c.n_classes; ++k) {
    int64_t row = 0;
    for (int64_t j = 0; j < c.n_classes; ++j) row += c.at(k, j);
    if (row == 0) continue;
    sum += static_cast<double>(c.at(k, k)) / static_cast<double>(row);
    ++present;
  }
  return sum / static_cast<double>(present);
}

double kappa(const Confusion& c) {
  const int64_t n = c.total();
  if (n == 0) throw InputError("metrics: empty confusion matrix");
  const double dn = static_cast<double>(n);
  double po = 0.0, pe = 0.0;
  for (int64_t k = 0; k < c.n_classes; ++k) {
    po += static_cast<double>(c.at(k, k));
    int64_t row = 0, col = 0;
    for (int64_t j = 0; j < c.n_classes; ++j) {
      row += c.at(k, j);
      col += c.at(j, k);
    }
    pe += (static_cast<double>(row) / dn) * (static_cast<double>(col) / dn);
  }
  po /= dn;
  const double denom = 1.0 - pe;
  if (denom < 1e-15) return po >= 1.0 - 1e-15 ? 1.0 : 0.0;
  return (po - pe) / denom;
}

}  // namespace bhsrs
