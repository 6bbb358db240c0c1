#pragma once

#include <cstdint>
#include <vector>

#include "bhsrs/cube.hpp"
#include "bhsrs/rng.hpp"
#include "bhsrs/split.hpp"
#include "bhsrs/tensor.hpp"

namespace bhsrs {

// One labeled pixel prepared for the classifier: its (y, x) location and
// 0-based class index.
struct Sample {
  int64_t y = 0;
  int64_t x = 0;
  int32_t label = 0;
};

// All pixels of the split holding the given role, in row-major scan order.
std::vector<Sample> samples_for_role(const LabelMap& labels, const Split& split, Role role);

// Square patch centered on the pixel, channels first. Pixels that fall
// outside the image are mirrored without repeating the border (the reflect
// axis sits ON the edge pixel), so a 1-pixel border reflects as b a b.
// patch must be odd; the image must be at least (patch+1)/2 in each axis so
// a single reflection covers the overhang.
Tensor extract_patch(const FeatureCube& cube, int64_t y, int64_t x, int64_t patch);

// Batch variant: one tensor [n, bands, patch, patch] for samples[first..first+n).
Tensor extract_patches(const FeatureCube& cube, const std::vector<Sample>& samples,
                       int64_t first, int64_t n, int64_t patch);

// Labels for the same window as a flat vector.
std::vector<int32_t> batch_labels(const std::vector<Sample>& samples, int64_t first, int64_t n);

// Random symmetry of the square: an optional vertical flip (up-down) followed
// by 0..3 quarter-turn counterclockwise rotations, drawn uniformly. Covers
// all 8 orientations of the patch. Applied per sample across the batch.
void augment_patches(Tensor& batch, Rng& rng);

}  // namespace bhsrs
