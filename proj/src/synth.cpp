#include "bhsrs/synth.hpp"

#include <cmath>
#include <vector>

#include "bhsrs/rng.hpp"

namespace bhsrs {

SynthScene synth_scene(const SynthConfig& config) {
  if (config.h < 4 || config.w < 4 || config.bands < 2 || config.n_classes < 2 ||
      config.sites_per_class < 1) {
    throw InputError("synth: degenerate scene configuration");
  }
  if (config.noise < 0.0) throw InputError("synth: negative noise level");

  Rng rng(config.seed);
  const int64_t n_sites = config.sites_per_class * config.n_classes;
  std::vector<double> sy(static_cast<size_t>(n_sites)), sx(static_cast<size_t>(n_sites));
  std::vector<int32_t> site_class(static_cast<size_t>(n_sites));
  for (int64_t s = 0; s < n_sites; ++s) {
    sy[static_cast<size_t>(s)] = rng.uniform() * static_cast<double>(config.h);
    sx[static_cast<size_t>(s)] = rng.uniform() * static_cast<double>(config.w);
    // Round-robin assignment: every class owns the same number of cells.
    site_class[static_cast<size_t>(s)] = static_cast<int32_t>(s % config.n_classes) + 1;
  }

  SynthScene scene;
  scene.labels.h = config.h;
  scene.labels.w = config.w;
  scene.labels.data.resize(static_cast<size_t>(config.h * config.w));
  for (int64_t y = 0; y < config.h; ++y) {
    for (int64_t x = 0; x < config.w; ++x) {
      double best = 0.0;
      int64_t who = -1;
      for (int64_t s = 0; s < n_sites; ++s) {
        const double dy = static_cast<double>(y) + 0.5 - sy[static_cast<size_t>(s)];
        const double dx = static_cast<double>(x) + 0.5 - sx[static_cast<size_t>(s)];
        const double d2 = dy * dy + dx * dx;
        if (who < 0 || d2 < best) {
          best = d2;
          who = s;
        }
      }
      scene.labels.data[static_cast<size_t>(y * config.w + x)] =
          site_class[static_cast<size_t>(who)];
    }
  }

  // Class spectra: smooth sinusoids with class-dependent phase and a class
  // offset, well separated yet overlapping in range so the task is not
  // solvable from a single band threshold.
  const double pi = 3.14159265358979323846;
  auto spectrum = [&](int32_t cls, int64_t band) {
    const double u = static_cast<double>(band) / static_cast<double>(config.bands);
    const double phase = 2.0 * pi * static_cast<double>(cls - 1) /
                         static_cast<double>(config.n_classes);
    return 0.5 + 0.3 * std::sin(2.0 * pi * u + phase) +
           0.05 * static_cast<double>(cls - 1);
  };

  scene.cube.h = config.h;
  scene.cube.w = config.w;
  scene.cube.bands = config.bands;
  scene.cube.data.resize(static_cast<size_t>(config.h * config.w * config.bands));
  for (int64_t y = 0; y < config.h; ++y) {
    for (int64_t x = 0; x < config.w; ++x) {
      const int32_t cls = scene.labels.at(y, x);
      const double illum =
          1.0 + config.illumination *
                    std::sin(2.0 * pi * static_cast<double>(x) / static_cast<double>(config.w)) *
                    std::cos(2.0 * pi * static_cast<double>(y) / static_cast<double>(config.h));
      for (int64_t b = 0; b < config.bands; ++b) {
        scene.cube.at(b, y, x) = spectrum(cls, b) * illum + config.noise * rng.normal();
      }
    }
  }
  return scene;
}

}  // namespace bhsrs
