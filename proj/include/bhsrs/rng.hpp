#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

namespace bhsrs {

// All randomness in the library flows through this wrapper so that a run is
// reproducible from a single integer seed. Distinct subsystems get their own
// streams via spawn(), which derives an independent seed instead of sharing
// generator state; this keeps e.g. data shuffling from perturbing weight
// sampling when one side adds a draw.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), eng_(mix(seed)) {}

  double normal() { return normal_(eng_); }
  double normal(double mean, double stddev) { return mean + stddev * normal_(eng_); }
  // Uniform in [0, 1).
  double uniform() { return uniform_(eng_); }
  // Uniform integer in [0, n). n must be positive.
  uint64_t integer(uint64_t n) {
    return std::uniform_int_distribution<uint64_t>(0, n - 1)(eng_);
  }

  // Independent stream addressed by (base seed, stream id).
  Rng spawn(uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ull))); }

  uint64_t seed() const { return seed_; }
  std::mt19937_64& engine() { return eng_; }

  template <typename It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, eng_);
  }

 private:
  // splitmix64 finalizer; decorrelates consecutive seeds.
  static uint64_t mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  uint64_t seed_;
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace bhsrs
