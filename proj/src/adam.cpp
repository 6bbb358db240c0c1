#include "bhsrs/adam.hpp"

#include <cmath>

namespace bhsrs {

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.lr > 0.0)) throw InputError(cat("adam: lr must be positive, got ", config_.lr));
  if (config_.beta1 < 0.0 || config_.beta1 >= 1.0 || config_.beta2 < 0.0 || config_.beta2 >= 1.0) {
    throw InputError("adam: betas must lie in [0, 1)");
  }
  for (auto& [name, p] : params_) {
    if (!p.defined()) throw UsageError(cat("adam: undefined parameter '", name, "'"));
    if (state_.m.count(name) != 0) throw UsageError(cat("adam: duplicate parameter '", name, "'"));
    state_.m[name].assign(p.numel(), 0.0);
    state_.v[name].assign(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++state_.t;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(state_.t));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(state_.t));
  for (auto& [name, p] : params_) {
    const std::vector<double>& g = p.grad();
    if (g.empty()) continue;  // no gradient flowed to this parameter this step
    auto& m = state_.m[name];
    auto& v = state_.v[name];
    double* w = p.data();
    for (size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw InputError(cat("adam: non-finite gradient in parameter '", name, "' at index ", i));
      }
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) {
    (void)name;
    p.zero_grad();
  }
}

AdamState Adam::export_state() const { return state_; }

void Adam::import_state(const AdamState& state) {
  if (state.t < 0) throw InputError("adam: negative step count in imported state");
  for (auto& [name, p] : params_) {
    auto mi = state.m.find(name);
    auto vi = state.v.find(name);
    if (mi == state.m.end() || vi == state.v.end()) {
      throw InputError(cat("adam: imported state is missing parameter '", name, "'"));
    }
    if (static_cast<int64_t>(mi->second.size()) != p.numel() ||
        static_cast<int64_t>(vi->second.size()) != p.numel()) {
      throw InputError(cat("adam: state size mismatch for parameter '", name, "'"));
    }
  }
  state_ = state;
}

}  // namespace bhsrs
