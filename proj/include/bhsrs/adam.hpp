#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bhsrs/tensor.hpp"

namespace bhsrs {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  // Added outside the square root: w -= lr * mhat / (sqrt(vhat) + eps).
  double eps = 1e-8;
};

// Serializable optimizer state (first/second moment per parameter, step count).
struct AdamState {
  int64_t t = 0;
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

class Adam {
 public:
  // Parameters are (name, tensor) pairs; tensors are aliased, not copied.
  Adam(std::vector<std::pair<std::string, Tensor>> params, AdamConfig config = {});

  // One bias-corrected update from the tensors' current gradients. A
  // parameter whose gradient buffer was never touched is skipped for this
  // step; a NaN or Inf gradient raises InputError naming the parameter.
  void step();
  void zero_grad();

  int64_t t() const { return state_.t; }
  const AdamConfig& config() const { return config_; }

  AdamState export_state() const;
  // Restores moments and step count; names and sizes must match.
  void import_state(const AdamState& state);

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  AdamConfig config_;
  AdamState state_;
};

}  // namespace bhsrs
