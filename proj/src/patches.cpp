#include "bhsrs/patches.hpp"

#include <algorithm>

namespace bhsrs {

namespace {

// Reflect an out-of-range coordinate back into [0, n) with the mirror axis on
// the boundary sample itself: -1 -> 1, -2 -> 2, n -> n-2. Valid only for
// overhangs up to n-1, which the callers guarantee.
int64_t reflect101(int64_t i, int64_t n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

void check_patch_geometry(const FeatureCube& cube, int64_t patch) {
  cube.validate();
  if (patch < 1 || patch % 2 == 0) {
    throw InputError(cat("patches: patch size must be odd and positive, got ", patch));
  }
  const int64_t half = patch / 2;
  // reflect101 can mirror at most n-1 past the border; centers at the edge
  // overhang by `half`.
  if (cube.h <= half || cube.w <= half) {
    throw InputError(cat("patches: image ", cube.h, "x", cube.w,
                         " too small for patch size ", patch));
  }
}

void copy_patch(const FeatureCube& cube, int64_t y, int64_t x, int64_t patch, double* dst) {
  const int64_t half = patch / 2;
  for (int64_t b = 0; b < cube.bands; ++b) {
    const double* src = cube.band(b);
    for (int64_t i = 0; i < patch; ++i) {
      const int64_t sy = reflect101(y - half + i, cube.h);
      for (int64_t j = 0; j < patch; ++j) {
        const int64_t sx = reflect101(x - half + j, cube.w);
        *dst++ = src[sy * cube.w + sx];
      }
    }
  }
}

}  // namespace

std::vector<Sample> samples_for_role(const LabelMap& labels, const Split& split, Role role) {
  labels.validate();
  if (labels.h != split.h || labels.w != split.w) {
    throw InputError("samples: split does not match label map");
  }
  std::vector<Sample> out;
  for (int64_t p = 0; p < labels.pixels(); ++p) {
    if (split.roles[static_cast<size_t>(p)] != static_cast<uint8_t>(role)) continue;
    const int32_t cls = labels.data[p];
    if (cls < 1) {
      throw InternalError(cat("samples: unlabeled pixel ", p, " holds a split role"));
    }
    out.push_back({p / labels.w, p % labels.w, cls - 1});
  }
  return out;
}

Tensor extract_patch(const FeatureCube& cube, int64_t y, int64_t x, int64_t patch) {
  check_patch_geometry(cube, patch);
  if (y < 0 || y >= cube.h || x < 0 || x >= cube.w) {
    throw InputError(cat("patches: center (", y, ", ", x, ") outside ", cube.h, "x", cube.w));
  }
  Tensor out = make_tensor({cube.bands, patch, patch}, false);
  copy_patch(cube, y, x, patch, out.data());
  return out;
}

Tensor extract_patches(const FeatureCube& cube, const std::vector<Sample>& samples,
                       int64_t first, int64_t n, int64_t patch) {
  check_patch_geometry(cube, patch);
  if (first < 0 || n < 1 || first + n > static_cast<int64_t>(samples.size())) {
    throw InputError(cat("patches: window [", first, ", ", first + n, ") outside ",
                         samples.size(), " samples"));
  }
  Tensor out = make_tensor({n, cube.bands, patch, patch}, false);
  const int64_t stride = cube.bands * patch * patch;
  for (int64_t s = 0; s < n; ++s) {
    const Sample& smp = samples[static_cast<size_t>(first + s)];
    if (smp.y < 0 || smp.y >= cube.h || smp.x < 0 || smp.x >= cube.w) {
      throw InputError(cat("patches: center (", smp.y, ", ", smp.x, ") outside ",
                           cube.h, "x", cube.w));
    }
    copy_patch(cube, smp.y, smp.x, patch, out.data() + s * stride);
  }
  return out;
}

std::vector<int32_t> batch_labels(const std::vector<Sample>& samples, int64_t first, int64_t n) {
  if (first < 0 || n < 1 || first + n > static_cast<int64_t>(samples.size())) {
    throw InputError(cat("patches: window [", first, ", ", first + n, ") outside ",
                         samples.size(), " samples"));
  }
  std::vector<int32_t> out(static_cast<size_t>(n));
  for (int64_t s = 0; s < n; ++s) out[static_cast<size_t>(s)] = samples[static_cast<size_t>(first + s)].label;
  return out;
}

void augment_patches(Tensor& batch, Rng& rng) {
  if (batch.shape().size() != 4) throw InputError("augment: expected [n, c, h, w]");
  const int64_t n = batch.dim(0), c = batch.dim(1), ph = batch.dim(2), pw = batch.dim(3);
  if (ph != pw) throw InputError("augment: rotations need square patches");
  std::vector<double> tmp(static_cast<size_t>(ph * pw));
  for (int64_t s = 0; s < n; ++s) {
    const bool flip = rng.integer(2) == 1;
    const int64_t rot = rng.integer(4);
    if (!flip && rot == 0) continue;
    for (int64_t ch = 0; ch < c; ++ch) {
      double* img = batch.data() + (s * c + ch) * ph * pw;
      if (flip) {
        for (int64_t i = 0; i < ph / 2; ++i) {
          std::swap_ranges(img + i * pw, img + (i + 1) * pw, img + (ph - 1 - i) * pw);
        }
      }
      for (int64_t r = 0; r < rot; ++r) {
        // Quarter turn counterclockwise: (i, j) receives old (j, w-1-i).
        for (int64_t i = 0; i < ph; ++i) {
          for (int64_t j = 0; j < pw; ++j) {
            tmp[static_cast<size_t>(i * pw + j)] = img[j * pw + (pw - 1 - i)];
          }
        }
        std::copy(tmp.begin(), tmp.end(), img);
      }
    }
  }
}

}  // namespace bhsrs
