#pragma once

#include <cstdint>
#include <vector>

namespace bhsrs {

// Square confusion matrix, rows = reference class, columns = prediction.
struct Confusion {
  int64_t n_classes = 0;
  std::vector<int64_t> counts;  // row-major n_classes x n_classes

  int64_t& at(int64_t ref, int64_t pred) { return counts[ref * n_classes + pred]; }
  int64_t at(int64_t ref, int64_t pred) const { return counts[ref * n_classes + pred]; }
  int64_t total() const;
};

Confusion confusion_matrix(const std::vector<int32_t>& reference,
                           const std::vector<int32_t>& predicted, int64_t n_classes);

// Fraction of samples predicted correctly.
double overall_accuracy(const Confusion& c);

// Mean of per-class recalls over the classes that actually occur in the
// reference; absent classes are left out rather than counted as zero.
double average_accuracy(const Confusion& c);

// Chance-corrected agreement (p_o - p_e) / (1 - p_e). When the chance term
// saturates (p_e == 1, a degenerate single-class problem) the score is 1 for
// perfect agreement and 0 otherwise.
double kappa(const Confusion& c);

}  // namespace bhsrs
