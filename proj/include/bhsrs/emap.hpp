#pragma once

#include <cstdint>
#include <vector>

#include "bhsrs/cube.hpp"
#include "bhsrs/pca.hpp"

namespace bhsrs {

// Attribute profile of one base image: 2L+1 bands ordered
//   [ closing(lambda_L) ... closing(lambda_1), original,
//     opening(lambda_1) ... opening(lambda_L) ]
// i.e. closings with thresholds descending, then the image, then openings
// ascending, so band index moves monotonically from "dark structures
// removed" to "bright structures removed".
std::vector<double> attribute_profile(const std::vector<double>& base, int64_t h, int64_t w,
                                      const std::vector<int64_t>& lambdas);

struct EmapConfig {
  // Area thresholds (pixels) for the attribute filters.
  std::vector<int64_t> lambdas = {100, 500, 1000, 5000};
  // Cumulative explained variance retained by both PCA stages.
  double variance_target = 0.99;
};

struct EmapResult {
  FeatureCube features;         // min-max normalized to [0,1] on the fit pixels
  int64_t base_images = 0;      // components kept by the first PCA
  int64_t profile_bands = 0;    // base_images * (2L+1)
  std::vector<int64_t> constant_features;  // zeroed because max == min
  PcaModel pca1;
  PcaModel pca2;
  std::vector<double> feature_min;  // per kept feature, from the fit pixels
  std::vector<double> feature_max;
};

// Extended multi-attribute profile features:
//   spectral PCA -> area-profile stack per retained component -> second PCA
//   -> per-feature min-max normalization.
// When labels are given and contain labeled pixels, the min/max statistics
// come from labeled pixels only (values elsewhere may fall outside [0,1]);
// otherwise every pixel contributes. Constant features are zeroed and
// reported. Throws InputError if the cube has no spectral variance.
EmapResult emap_features(const HyperCube& cube, const LabelMap* labels, const EmapConfig& cfg);

}  // namespace bhsrs
