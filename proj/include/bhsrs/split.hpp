#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bhsrs/cube.hpp"

namespace bhsrs {

enum class Role : uint8_t { None = 0, Train = 1, Val = 2, Test = 3 };

struct Split {
  int64_t h = 0;
  int64_t w = 0;
  std::vector<uint8_t> roles;  // row-major, values from Role
  std::string policy;          // "cc" or "random"
  uint64_t seed = 0;
  int64_t pixels_per_class = 0;
  double val_fraction = 0.0;
  // Classes whose training pixels could not be drawn as requested (component
  // smaller than pixels_per_class after the redraw budget, or too few pixels).
  std::vector<int32_t> flagged_classes;

  Role at(int64_t p) const { return static_cast<Role>(roles[p]); }
  int64_t count(Role r) const;
};

// Spatially compact training split: for every class, pick a random seed
// pixel, flood its 4-connected same-class component and keep the first
// pixels_per_class pixels in breadth-first order. Components smaller than
// that trigger a redraw (up to 10); if all fail, the class's largest
// component is used (taking everything it has, flagged in the result).
// Remaining labeled pixels are split per class into validation and test by
// val_fraction, uniformly at random. Deterministic for a given seed.
Split cc_train_split(const LabelMap& labels, int64_t pixels_per_class, double val_fraction,
                     uint64_t seed);

// Baseline policy: training pixels drawn uniformly per class (no spatial
// structure); validation/test handled identically to cc_train_split.
Split random_train_split(const LabelMap& labels, int64_t pixels_per_class, double val_fraction,
                         uint64_t seed);

// Round-trip as JSON with run-length-encoded roles.
void split_save(const Split& split, const std::string& path);
Split split_load(const std::string& path);

// Spatial separation between training and evaluation pixels: for each
// evaluation (val/test) pixel, the Chebyshev distance to the nearest
// training pixel OF ITS OWN CLASS (8-connected BFS = Chebyshev balls).
// counts[d] holds evaluation pixels at distance exactly d; unreachable
// pixels (class without any training pixel) are counted separately and
// never enter counts.
struct OverlapHistogram {
  std::vector<int64_t> counts;
  int64_t total = 0;        // all evaluation pixels, including unreachable
  int64_t unreachable = 0;

  // P(distance < d): the fraction of evaluation pixels lying strictly
  // within Chebyshev distance d of a same-class training pixel.
  double fraction_below(int64_t d) const;
};

OverlapHistogram overlap_histogram(const LabelMap& labels, const Split& split);

}  // namespace bhsrs
