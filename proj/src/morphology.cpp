#include "bhsrs/morphology.hpp"

#include <algorithm>
#include <numeric>

namespace bhsrs {
namespace {

constexpr int64_t kUnprocessed = -2;
constexpr int64_t kRoot = -1;

int64_t find_root(std::vector<int64_t>& parent, int64_t p) {
  // Path halving.
  while (parent[p] >= 0) {
    const int64_t gp = parent[parent[p]];
    if (gp >= 0) parent[p] = gp;
    p = parent[p];
  }
  return p;
}

}  // namespace

std::vector<double> area_opening(const std::vector<double>& img, int64_t h, int64_t w,
                                 int64_t lambda) {
  if (h < 1 || w < 1) throw InputError(cat("area_opening: empty image ", h, "x", w));
  if (static_cast<int64_t>(img.size()) != h * w) {
    throw InputError(cat("area_opening: image size ", img.size(), " is not h*w = ", h * w));
  }
  if (lambda < 1) throw InputError(cat("area_opening: lambda must be >= 1, got ", lambda));
  const int64_t n = h * w;

  // Pixels in descending value order (ties broken by index so the pass is
  // deterministic). Processing order is what makes each union-find root the
  // lowest pixel of its partial component.
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    if (img[a] != img[b]) return img[a] > img[b];
    return a < b;
  });

  std::vector<int64_t> parent(n, kUnprocessed);
  std::vector<int64_t> area(n, 0);

  const int64_t dr[4] = {-1, 1, 0, 0};
  const int64_t dc[4] = {0, 0, -1, 1};

  for (int64_t p : order) {
    parent[p] = kRoot;
    area[p] = 1;
    const int64_t r = p / w, c = p % w;
    for (int k = 0; k < 4; ++k) {
      const int64_t nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
      const int64_t q = nr * w + nc;
      if (parent[q] == kUnprocessed) continue;  // brighter pass hasn't reached it
      const int64_t root = find_root(parent, q);
      if (root == p) continue;
      if (img[root] == img[p] || area[root] < lambda) {
        // Same flat zone, or a still-growing brighter structure: absorb it.
        area[p] += area[root];
        parent[root] = p;
      } else {
        // Neighbor is a finished structure (area >= lambda) strictly above
        // this level; p's own component is therefore at least lambda too.
        area[p] = std::max(area[p], lambda);
      }
    }
  }

  // Resolution in reverse (ascending) order: every parent link points to a
  // pixel processed later, so parents resolve first.
  std::vector<double> out(n);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int64_t p = *it;
    out[p] = parent[p] >= 0 ? out[parent[p]] : img[p];
  }
  return out;
}

std::vector<double> area_closing(const std::vector<double>& img, int64_t h, int64_t w,
                                 int64_t lambda) {
  std::vector<double> neg(img.size());
  for (size_t i = 0; i < img.size(); ++i) neg[i] = -img[i];
  std::vector<double> opened = area_opening(neg, h, w, lambda);
  for (double& v : opened) v = -v;
  return opened;
}

}  // namespace bhsrs
