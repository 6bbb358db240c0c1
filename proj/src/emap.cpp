#include "bhsrs/emap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bhsrs/morphology.hpp"

namespace bhsrs {

std::vector<double> attribute_profile(const std::vector<double>& base, int64_t h, int64_t w,
                                      const std::vector<int64_t>& lambdas) {
  if (lambdas.empty()) throw InputError("attribute_profile: no thresholds given");
  for (size_t i = 0; i < lambdas.size(); ++i) {
    if (lambdas[i] < 1) throw InputError("attribute_profile: thresholds must be >= 1");
    if (i > 0 && lambdas[i] <= lambdas[i - 1]) {
      throw InputError("attribute_profile: thresholds must be strictly increasing");
    }
  }
  const int64_t L = static_cast<int64_t>(lambdas.size());
  const int64_t px = h * w;
  std::vector<double> out((2 * L + 1) * px);
  for (int64_t i = 0; i < L; ++i) {
    std::vector<double> clo = area_closing(base, h, w, lambdas[L - 1 - i]);
    std::copy(clo.begin(), clo.end(), out.begin() + i * px);
  }
  std::copy(base.begin(), base.end(), out.begin() + L * px);
  for (int64_t i = 0; i < L; ++i) {
    std::vector<double> ope = area_opening(base, h, w, lambdas[i]);
    std::copy(ope.begin(), ope.end(), out.begin() + (L + 1 + i) * px);
  }
  return out;
}

EmapResult emap_features(const HyperCube& cube, const LabelMap* labels, const EmapConfig& cfg) {
  cube.validate();
  if (labels != nullptr) {
    labels->validate();
    if (labels->h != cube.h || labels->w != cube.w) {
      throw InputError(cat("emap: label map ", labels->h, "x", labels->w,
                           " does not match cube ", cube.h, "x", cube.w));
    }
  }
  const int64_t px = cube.pixels();
  const int64_t C = cube.bands;

  // Pixels as rows for the spectral PCA (gather from band-sequential).
  std::vector<double> rows(px * C);
  parallel_for(px, [&](int64_t p0, int64_t p1) {
    for (int64_t p = p0; p < p1; ++p) {
      for (int64_t b = 0; b < C; ++b) rows[p * C + b] = cube.data[b * px + p];
    }
  });

  EmapResult res;
  res.pca1 = pca_fit(rows, px, C, cfg.variance_target);
  if (res.pca1.k == 0) {
    throw InputError("emap: cube has zero spectral variance, nothing to extract");
  }
  res.base_images = res.pca1.k;

  // Base images, then one attribute profile per base image, stacked
  // band-sequentially into profile rows for the second PCA.
  std::vector<double> base_all = pca_project_all(res.pca1, rows, px);  // px x k
  rows.clear();
  rows.shrink_to_fit();

  const int64_t L = static_cast<int64_t>(cfg.lambdas.size());
  const int64_t bands_per_base = 2 * L + 1;
  const int64_t P = res.base_images * bands_per_base;
  res.profile_bands = P;
  std::vector<double> profiles(px * P);  // pixel-major rows for the second fit
  std::vector<double> base(px);
  for (int64_t k = 0; k < res.base_images; ++k) {
    for (int64_t p = 0; p < px; ++p) base[p] = base_all[p * res.base_images + k];
    std::vector<double> prof = attribute_profile(base, cube.h, cube.w, cfg.lambdas);
    for (int64_t b = 0; b < bands_per_base; ++b) {
      const double* src = prof.data() + b * px;
      const int64_t col = k * bands_per_base + b;
      for (int64_t p = 0; p < px; ++p) profiles[p * P + col] = src[p];
    }
  }

  res.pca2 = pca_fit(profiles, px, P, cfg.variance_target);
  if (res.pca2.k == 0) {
    throw InputError("emap: attribute profiles have zero variance");
  }
  const int64_t F = res.pca2.k;
  std::vector<double> feats = pca_project_all(res.pca2, profiles, px);  // px x F
  profiles.clear();
  profiles.shrink_to_fit();

  // Min-max per feature over the fit pixels (labeled subset if available).
  std::vector<int64_t> fit_pixels;
  if (labels != nullptr) {
    for (int64_t p = 0; p < px; ++p) {
      if (labels->data[p] > 0) fit_pixels.push_back(p);
    }
  }
  const bool use_all = fit_pixels.empty();
  res.feature_min.assign(F, std::numeric_limits<double>::infinity());
  res.feature_max.assign(F, -std::numeric_limits<double>::infinity());
  const int64_t n_fit = use_all ? px : static_cast<int64_t>(fit_pixels.size());
  for (int64_t i = 0; i < n_fit; ++i) {
    const int64_t p = use_all ? i : fit_pixels[i];
    for (int64_t f = 0; f < F; ++f) {
      const double v = feats[p * F + f];
      res.feature_min[f] = std::min(res.feature_min[f], v);
      res.feature_max[f] = std::max(res.feature_max[f], v);
    }
  }

  res.features.h = cube.h;
  res.features.w = cube.w;
  res.features.bands = F;
  res.features.data.assign(F * px, 0.0);
  for (int64_t f = 0; f < F; ++f) {
    const double lo = res.feature_min[f], hi = res.feature_max[f];
    if (!(hi > lo)) {
      res.constant_features.push_back(f);
      continue;  // stays zero
    }
    const double inv = 1.0 / (hi - lo);
    double* dst = res.features.band(f);
    for (int64_t p = 0; p < px; ++p) dst[p] = (feats[p * F + f] - lo) * inv;
  }
  if (!res.constant_features.empty()) {
    warn(cat("emap: ", res.constant_features.size(),
             " feature(s) were constant on the fit pixels and were zeroed"));
  }
  return res;
}

}  // namespace bhsrs
