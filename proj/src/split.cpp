#include "bhsrs/split.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

#include "bhsrs/rng.hpp"
#include "nlohmann/json.hpp"

namespace bhsrs {

namespace {

// Fixed scan order (north, south, west, east) keeps breadth-first traversal,
// and with it the set of selected pixels, identical across runs.
constexpr int kDy4[4] = {-1, 1, 0, 0};
constexpr int kDx4[4] = {0, 0, -1, 1};

std::vector<std::vector<int64_t>> pixels_by_class(const LabelMap& labels, int32_t n_classes) {
  std::vector<std::vector<int64_t>> by_class(static_cast<size_t>(n_classes) + 1);
  for (int64_t p = 0; p < labels.pixels(); ++p) {
    by_class[static_cast<size_t>(labels.data[p])].push_back(p);
  }
  return by_class;
}

// Breadth-first walk of the 4-connected component of `start` restricted to
// pixels of the same class, stopping once `cap` pixels are collected.
std::vector<int64_t> grow_component(const LabelMap& labels, int64_t start, int64_t cap) {
  const int64_t h = labels.h, w = labels.w;
  const int32_t cls = labels.data[start];
  std::vector<int64_t> out;
  out.reserve(static_cast<size_t>(cap));
  std::vector<uint8_t> seen(static_cast<size_t>(h * w), 0);
  std::deque<int64_t> frontier;
  frontier.push_back(start);
  seen[static_cast<size_t>(start)] = 1;
  while (!frontier.empty() && static_cast<int64_t>(out.size()) < cap) {
    const int64_t p = frontier.front();
    frontier.pop_front();
    out.push_back(p);
    const int64_t y = p / w, x = p % w;
    for (int d = 0; d < 4; ++d) {
      const int64_t ny = y + kDy4[d], nx = x + kDx4[d];
      if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
      const int64_t q = ny * w + nx;
      if (seen[static_cast<size_t>(q)] || labels.data[q] != cls) continue;
      seen[static_cast<size_t>(q)] = 1;
      frontier.push_back(q);
    }
  }
  return out;
}

// Largest 4-connected component of the class; ties broken by scan order of
// the component's first pixel (the earlier one wins by >, not >=).
std::vector<int64_t> largest_component(const LabelMap& labels,
                                       const std::vector<int64_t>& class_pixels) {
  std::vector<uint8_t> done(static_cast<size_t>(labels.pixels()), 0);
  std::vector<int64_t> best;
  for (int64_t p : class_pixels) {
    if (done[static_cast<size_t>(p)]) continue;
    std::vector<int64_t> comp = grow_component(labels, p, labels.pixels());
    for (int64_t q : comp) done[static_cast<size_t>(q)] = 1;
    if (comp.size() > best.size()) best = std::move(comp);
  }
  return best;
}

void assign_val_test(const LabelMap& labels, Split& split, double val_fraction, Rng& rng,
                     int32_t n_classes) {
  const auto by_class = pixels_by_class(labels, n_classes);
  for (int32_t c = 1; c <= n_classes; ++c) {
    std::vector<int64_t> rest;
    for (int64_t p : by_class[static_cast<size_t>(c)]) {
      if (split.roles[static_cast<size_t>(p)] == static_cast<uint8_t>(Role::None)) {
        rest.push_back(p);
      }
    }
    rng.shuffle(rest.begin(), rest.end());
    const int64_t n_val =
        std::llround(val_fraction * static_cast<double>(rest.size()));
    for (int64_t i = 0; i < static_cast<int64_t>(rest.size()); ++i) {
      split.roles[static_cast<size_t>(rest[static_cast<size_t>(i)])] =
          static_cast<uint8_t>(i < n_val ? Role::Val : Role::Test);
    }
  }
}

void check_split_args(const LabelMap& labels, int64_t pixels_per_class, double val_fraction) {
  labels.validate();
  if (pixels_per_class < 1) throw InputError("split: pixels_per_class must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw InputError(cat("split: val_fraction must be in [0, 1), got ", val_fraction));
  }
}

}  // namespace

int64_t Split::count(Role r) const {
  int64_t n = 0;
  for (uint8_t v : roles) n += (v == static_cast<uint8_t>(r));
  return n;
}

Split cc_train_split(const LabelMap& labels, int64_t pixels_per_class, double val_fraction,
                     uint64_t seed) {
  check_split_args(labels, pixels_per_class, val_fraction);
  const int32_t n_classes = labels.max_class();
  if (n_classes < 1) throw InputError("split: label map has no labeled pixels");
  Split split;
  split.h = labels.h;
  split.w = labels.w;
  split.roles.assign(static_cast<size_t>(labels.pixels()), 0);
  split.policy = "cc";
  split.seed = seed;
  split.pixels_per_class = pixels_per_class;
  split.val_fraction = val_fraction;

  Rng rng(seed);
  const auto by_class = pixels_by_class(labels, n_classes);
  for (int32_t c = 1; c <= n_classes; ++c) {
    const auto& pool = by_class[static_cast<size_t>(c)];
    if (pool.empty()) continue;
    std::vector<int64_t> chosen;
    for (int attempt = 0; attempt < 11; ++attempt) {
      const int64_t start = pool[static_cast<size_t>(rng.integer(static_cast<int64_t>(pool.size())))];
      chosen = grow_component(labels, start, pixels_per_class);
      if (static_cast<int64_t>(chosen.size()) == pixels_per_class) break;
    }
    if (static_cast<int64_t>(chosen.size()) < pixels_per_class) {
      // Every draw landed in a component smaller than requested; fall back to
      // the biggest one the class has, flagging a genuine shortfall.
      chosen = largest_component(labels, pool);
      if (static_cast<int64_t>(chosen.size()) > pixels_per_class) {
        chosen.resize(static_cast<size_t>(pixels_per_class));
      } else if (static_cast<int64_t>(chosen.size()) < pixels_per_class) {
        split.flagged_classes.push_back(c);
      }
    }
    for (int64_t p : chosen) split.roles[static_cast<size_t>(p)] = static_cast<uint8_t>(Role::Train);
  }
  assign_val_test(labels, split, val_fraction, rng, n_classes);
  return split;
}

Split random_train_split(const LabelMap& labels, int64_t pixels_per_class, double val_fraction,
                         uint64_t seed) {
  check_split_args(labels, pixels_per_class, val_fraction);
  const int32_t n_classes = labels.max_class();
  if (n_classes < 1) throw InputError("split: label map has no labeled pixels");
  Split split;
  split.h = labels.h;
  split.w = labels.w;
  split.roles.assign(static_cast<size_t>(labels.pixels()), 0);
  split.policy = "random";
  split.seed = seed;
  split.pixels_per_class = pixels_per_class;
  split.val_fraction = val_fraction;

  Rng rng(seed);
  const auto by_class = pixels_by_class(labels, n_classes);
  for (int32_t c = 1; c <= n_classes; ++c) {
    std::vector<int64_t> pool = by_class[static_cast<size_t>(c)];
    if (pool.empty()) continue;
    rng.shuffle(pool.begin(), pool.end());
    int64_t take = pixels_per_class;
    if (static_cast<int64_t>(pool.size()) < take) {
      take = static_cast<int64_t>(pool.size());
      split.flagged_classes.push_back(c);
    }
    for (int64_t i = 0; i < take; ++i) {
      split.roles[static_cast<size_t>(pool[static_cast<size_t>(i)])] =
          static_cast<uint8_t>(Role::Train);
    }
  }
  assign_val_test(labels, split, val_fraction, rng, n_classes);
  return split;
}

void split_save(const Split& split, const std::string& path) {
  nlohmann::json j;
  j["kind"] = "split";
  j["h"] = split.h;
  j["w"] = split.w;
  j["policy"] = split.policy;
  j["seed"] = split.seed;
  j["pixels_per_class"] = split.pixels_per_class;
  j["val_fraction"] = split.val_fraction;
  j["flagged_classes"] = split.flagged_classes;
  nlohmann::json rle = nlohmann::json::array();
  int64_t i = 0;
  const int64_t n = static_cast<int64_t>(split.roles.size());
  while (i < n) {
    int64_t j2 = i;
    while (j2 < n && split.roles[static_cast<size_t>(j2)] == split.roles[static_cast<size_t>(i)]) {
      ++j2;
    }
    rle.push_back({static_cast<int>(split.roles[static_cast<size_t>(i)]), j2 - i});
    i = j2;
  }
  j["roles_rle"] = std::move(rle);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(cat("split: cannot write ", path));
  out << j.dump(2) << "\n";
  if (!out) throw IoError(cat("split: write failed for ", path));
}

Split split_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(cat("split: cannot read ", path));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError(cat("split: invalid JSON in ", path, ": ", e.what()));
  }
  try {
    if (j.at("kind").get<std::string>() != "split") {
      throw ParseError(cat("split: ", path, " is not a split file"));
    }
    Split split;
    split.h = j.at("h").get<int64_t>();
    split.w = j.at("w").get<int64_t>();
    split.policy = j.at("policy").get<std::string>();
    split.seed = j.at("seed").get<uint64_t>();
    split.pixels_per_class = j.at("pixels_per_class").get<int64_t>();
    split.val_fraction = j.at("val_fraction").get<double>();
    split.flagged_classes = j.at("flagged_classes").get<std::vector<int32_t>>();
    if (split.h < 1 || split.w < 1) throw ParseError("split: bad dimensions");
    split.roles.reserve(static_cast<size_t>(split.h * split.w));
    for (const auto& run : j.at("roles_rle")) {
      const int role = run.at(0).get<int>();
      const int64_t len = run.at(1).get<int64_t>();
      if (role < 0 || role > 3 || len < 1) throw ParseError("split: bad RLE entry");
      split.roles.insert(split.roles.end(), static_cast<size_t>(len), static_cast<uint8_t>(role));
    }
    if (static_cast<int64_t>(split.roles.size()) != split.h * split.w) {
      throw ParseError(cat("split: RLE covers ", split.roles.size(), " pixels, expected ",
                           split.h * split.w));
    }
    return split;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(cat("split: missing or mistyped field in ", path, ": ", e.what()));
  }
}

double OverlapHistogram::fraction_below(int64_t d) const {
  if (total == 0) return 0.0;
  int64_t below = 0;
  for (int64_t i = 0; i < d && i < static_cast<int64_t>(counts.size()); ++i) {
    below += counts[static_cast<size_t>(i)];
  }
  return static_cast<double>(below) / static_cast<double>(total);
}

OverlapHistogram overlap_histogram(const LabelMap& labels, const Split& split) {
  labels.validate();
  if (labels.h != split.h || labels.w != split.w ||
      split.roles.size() != static_cast<size_t>(labels.pixels())) {
    throw InputError("overlap: split does not match label map");
  }
  const int64_t h = labels.h, w = labels.w;
  const int32_t n_classes = labels.max_class();
  OverlapHistogram hist;
  // Distance field per class, seeded from that class's training pixels.
  // 8-connected BFS layers are exactly Chebyshev distance shells.
  std::vector<int64_t> dist(static_cast<size_t>(h * w));
  for (int32_t c = 1; c <= n_classes; ++c) {
    std::fill(dist.begin(), dist.end(), -1);
    std::deque<int64_t> frontier;
    for (int64_t p = 0; p < h * w; ++p) {
      if (labels.data[p] == c && split.roles[static_cast<size_t>(p)] == static_cast<uint8_t>(Role::Train)) {
        dist[static_cast<size_t>(p)] = 0;
        frontier.push_back(p);
      }
    }
    while (!frontier.empty()) {
      const int64_t p = frontier.front();
      frontier.pop_front();
      const int64_t y = p / w, x = p % w;
      for (int64_t dy = -1; dy <= 1; ++dy) {
        for (int64_t dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          const int64_t ny = y + dy, nx = x + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          const int64_t q = ny * w + nx;
          if (dist[static_cast<size_t>(q)] >= 0) continue;
          dist[static_cast<size_t>(q)] = dist[static_cast<size_t>(p)] + 1;
          frontier.push_back(q);
        }
      }
    }
    for (int64_t p = 0; p < h * w; ++p) {
      if (labels.data[p] != c) continue;
      const uint8_t r = split.roles[static_cast<size_t>(p)];
      if (r != static_cast<uint8_t>(Role::Val) && r != static_cast<uint8_t>(Role::Test)) continue;
      ++hist.total;
      const int64_t d = dist[static_cast<size_t>(p)];
      if (d < 0) {
        ++hist.unreachable;
        continue;
      }
      if (d >= static_cast<int64_t>(hist.counts.size())) {
        hist.counts.resize(static_cast<size_t>(d) + 1, 0);
      }
      ++hist.counts[static_cast<size_t>(d)];
    }
  }
  return hist;
}

}  // namespace bhsrs
