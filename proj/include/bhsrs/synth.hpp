#pragma once

#include <cstdint>

#include "bhsrs/cube.hpp"

namespace bhsrs {

struct SynthConfig {
  int64_t h = 64;
  int64_t w = 64;
  int64_t bands = 8;
  int32_t n_classes = 4;
  int64_t sites_per_class = 3;  // Voronoi seeds per class
  double noise = 0.05;          // per-sample Gaussian noise
  double illumination = 0.1;    // amplitude of the smooth brightness field
  uint64_t seed = 0;
};

struct SynthScene {
  HyperCube cube;
  LabelMap labels;  // fully labeled, classes 1..n_classes
};

// Blobby multi-class scene: classes are the nearest-site cells of scattered
// Voronoi seeds, giving each class a few compact regions like field plots.
// Each class has a distinct smooth spectrum, modulated by a slow
// illumination gradient plus white noise. Deterministic per seed; every
// class is guaranteed at least one site, hence at least one pixel.
SynthScene synth_scene(const SynthConfig& config);

}  // namespace bhsrs
