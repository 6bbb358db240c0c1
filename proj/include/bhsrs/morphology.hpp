#pragma once

#include <cstdint>
#include <vector>

#include "bhsrs/common.hpp"

namespace bhsrs {

// Area opening: removes every bright connected structure whose flat-zone
// stack holds fewer than lambda pixels, i.e. the largest image g <= f such
// that every connected component of every upper level set {g >= t} has at
// least lambda pixels. 4-connectivity, exact (not an approximation), via
// max-tree union-find over pixels sorted by descending value.
std::vector<double> area_opening(const std::vector<double>& img, int64_t h, int64_t w,
                                 int64_t lambda);

// Dual filter on dark structures: -area_opening(-f, lambda).
std::vector<double> area_closing(const std::vector<double>& img, int64_t h, int64_t w,
                                 int64_t lambda);

}  // namespace bhsrs
