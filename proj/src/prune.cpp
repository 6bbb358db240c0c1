#include "bhsrs/prune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bhsrs {

namespace {

// Overflow-safe scalar softplus; exactly 0 for arguments around -1000, which
// is what pruning writes into rho.
double softplus1(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double snr(double mu, double rho) {
  const double sigma = softplus1(rho);
  if (sigma == 0.0) {
    // A silenced connection scores 0 (pruned again first); a noise-free live
    // one can never be the weakest.
    return mu == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::abs(mu) / sigma;
}

}  // namespace

std::vector<double> prune_scores(const Network& net) {
  std::vector<double> scores;
  for (const Network::Prunable& p : net.prunable()) {
    const double* mu = p.w_or_mu.data();
    if (p.rho.defined()) {
      const double* rho = p.rho.data();
      for (int64_t i = 0; i < p.w_or_mu.numel(); ++i) scores.push_back(snr(mu[i], rho[i]));
    } else {
      for (int64_t i = 0; i < p.w_or_mu.numel(); ++i) scores.push_back(std::abs(mu[i]));
    }
  }
  return scores;
}

int64_t prunable_count(const Network& net) {
  int64_t n = 0;
  for (const Network::Prunable& p : net.prunable()) n += p.w_or_mu.numel();
  return n;
}

int64_t prune_network(Network& net, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw InputError(cat("prune: fraction must be in [0, 1], got ", fraction));
  }
  std::vector<Network::Prunable> layers = net.prunable();
  const std::vector<double> scores = prune_scores(net);
  const int64_t total = static_cast<int64_t>(scores.size());
  const int64_t n_prune = std::llround(fraction * static_cast<double>(total));
  if (n_prune == 0) return 0;

  // Global ranking; ties fall back to position so the cut is deterministic.
  std::vector<int64_t> order(static_cast<size_t>(total));
  for (int64_t i = 0; i < total; ++i) order[static_cast<size_t>(i)] = i;
  std::nth_element(order.begin(), order.begin() + (n_prune - 1), order.end(),
                   [&](int64_t a, int64_t b) {
                     const double sa = scores[static_cast<size_t>(a)];
                     const double sb = scores[static_cast<size_t>(b)];
                     return sa != sb ? sa < sb : a < b;
                   });
  std::vector<bool> kill(static_cast<size_t>(total), false);
  for (int64_t i = 0; i < n_prune; ++i) kill[static_cast<size_t>(order[static_cast<size_t>(i)])] = true;

  int64_t flat = 0;
  for (Network::Prunable& p : layers) {
    double* mu = p.w_or_mu.data();
    double* rho = p.rho.defined() ? p.rho.data() : nullptr;
    for (int64_t i = 0; i < p.w_or_mu.numel(); ++i, ++flat) {
      if (!kill[static_cast<size_t>(flat)]) continue;
      mu[i] = 0.0;
      if (rho != nullptr) rho[i] = -1000.0;  // softplus(-1000) == 0 exactly
    }
  }
  return n_prune;
}

}  // namespace bhsrs
