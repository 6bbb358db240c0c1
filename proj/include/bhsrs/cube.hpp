#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "bhsrs/common.hpp"

namespace bhsrs {

// Hyperspectral image in band-sequential order: data[b*h*w + y*w + x].
struct HyperCube {
  int64_t h = 0;
  int64_t w = 0;
  int64_t bands = 0;
  std::vector<double> data;

  double& at(int64_t b, int64_t y, int64_t x) { return data[(b * h + y) * w + x]; }
  double at(int64_t b, int64_t y, int64_t x) const { return data[(b * h + y) * w + x]; }
  const double* band(int64_t b) const { return data.data() + b * h * w; }
  double* band(int64_t b) { return data.data() + b * h * w; }
  int64_t pixels() const { return h * w; }

  void validate() const {
    if (h < 1 || w < 1 || bands < 1 ||
        static_cast<int64_t>(data.size()) != h * w * bands) {
      throw InputError(cat("cube: inconsistent dimensions ", h, "x", w, "x", bands,
                           " with ", data.size(), " values"));
    }
  }
};

// Per-pixel feature stack, same band-sequential layout as HyperCube.
using FeatureCube = HyperCube;

// Class labels per pixel, row-major; 0 = unlabeled, classes are 1-based.
struct LabelMap {
  int64_t h = 0;
  int64_t w = 0;
  std::vector<int32_t> data;

  int32_t at(int64_t y, int64_t x) const { return data[y * w + x]; }
  int64_t pixels() const { return h * w; }
  // Highest class id present (0 if fully unlabeled).
  int32_t max_class() const {
    int32_t m = 0;
    for (int32_t v : data) m = std::max(m, v);
    return m;
  }

  void validate() const {
    if (h < 1 || w < 1 || static_cast<int64_t>(data.size()) != h * w) {
      throw InputError(cat("labels: inconsistent dimensions ", h, "x", w, " with ", data.size(),
                           " values"));
    }
    for (int32_t v : data) {
      if (v < 0) throw InputError("labels: negative class id");
    }
  }
};

}  // namespace bhsrs
