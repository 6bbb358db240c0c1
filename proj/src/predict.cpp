#include "bhsrs/predict.hpp"

#include <algorithm>
#include <cmath>

#include "bhsrs/metrics.hpp"
#include "bhsrs/rng.hpp"

namespace bhsrs {

namespace {

// One forward pass over all samples in chunks; probabilities written to
// probs (n x k, caller-sized). rng may be null for the deterministic path.
void forward_probs(const Network& net, const FeatureCube& cube,
                   const std::vector<Sample>& samples, int64_t batch, Rng* rng, bool stochastic,
                   double* probs) {
  const int64_t n = static_cast<int64_t>(samples.size());
  const int64_t k = net.config().n_classes;
  for (int64_t first = 0; first < n; first += batch) {
    const int64_t m = std::min(batch, n - first);
    const Tensor x = extract_patches(cube, samples, first, m, net.config().patch);
    const Tensor logp = net.forward(x, rng, stochastic);
    const double* lp = logp.data();
    for (int64_t i = 0; i < m * k; ++i) probs[first * k + i] = std::exp(lp[i]);
  }
}

}  // namespace

DrawStats uncertainty_from_draws(const std::vector<double>& draw_probs, int64_t draws, int64_t k) {
  if (draws < 1 || k < 1 || static_cast<int64_t>(draw_probs.size()) != draws * k) {
    throw InputError("uncertainty: draw matrix size mismatch");
  }
  DrawStats s;
  s.mean.assign(static_cast<size_t>(k), 0.0);
  s.alea.assign(static_cast<size_t>(k * k), 0.0);
  s.epi.assign(static_cast<size_t>(k * k), 0.0);
  const double inv_t = 1.0 / static_cast<double>(draws);
  for (int64_t t = 0; t < draws; ++t) {
    const double* p = draw_probs.data() + t * k;
    for (int64_t a = 0; a < k; ++a) s.mean[static_cast<size_t>(a)] += p[a] * inv_t;
  }
  for (int64_t t = 0; t < draws; ++t) {
    const double* p = draw_probs.data() + t * k;
    for (int64_t a = 0; a < k; ++a) {
      for (int64_t b = 0; b < k; ++b) {
        const double diag = a == b ? p[a] : 0.0;
        s.alea[static_cast<size_t>(a * k + b)] += (diag - p[a] * p[b]) * inv_t;
        s.epi[static_cast<size_t>(a * k + b)] +=
            (p[a] - s.mean[static_cast<size_t>(a)]) * (p[b] - s.mean[static_cast<size_t>(b)]) * inv_t;
      }
    }
  }
  return s;
}

std::vector<int32_t> argmax_rows(const std::vector<double>& probs, int64_t n, int64_t k) {
  if (static_cast<int64_t>(probs.size()) != n * k || k < 1) {
    throw InputError("argmax: size mismatch");
  }
  std::vector<int32_t> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double* row = probs.data() + i * k;
    out[static_cast<size_t>(i)] =
        static_cast<int32_t>(std::max_element(row, row + k) - row);
  }
  return out;
}

std::vector<double> predict_mean(const Network& net, const FeatureCube& cube,
                                 const std::vector<Sample>& samples, int64_t batch) {
  if (samples.empty()) throw InputError("predict: no samples");
  if (batch < 1) throw InputError("predict: batch must be positive");
  std::vector<double> probs(samples.size() * static_cast<size_t>(net.config().n_classes));
  forward_probs(net, cube, samples, batch, nullptr, false, probs.data());
  return probs;
}

EnsembleResult predict_ensemble(const Network& net, const FeatureCube& cube,
                                const std::vector<Sample>& samples, int64_t draws, uint64_t seed,
                                int64_t batch) {
  if (samples.empty()) throw InputError("predict: no samples");
  if (batch < 1) throw InputError("predict: batch must be positive");
  if (draws < 1) throw InputError("predict: need at least one draw");
  const bool stochastic = net.config().mode == Mode::BNN;
  if (!stochastic) draws = 1;  // identical passes carry no information

  EnsembleResult r;
  r.n = static_cast<int64_t>(samples.size());
  r.k = net.config().n_classes;
  r.draws = draws;
  r.mean_prob.assign(static_cast<size_t>(r.n * r.k), 0.0);
  r.aleatoric.assign(static_cast<size_t>(r.n * r.k * r.k), 0.0);
  r.epistemic.assign(static_cast<size_t>(r.n * r.k * r.k), 0.0);

  Rng base(seed);
  std::vector<double> probs(static_cast<size_t>(r.n * r.k));
  for (int64_t t = 0; t < draws; ++t) {
    Rng draw_rng = base.spawn(static_cast<uint64_t>(t));
    forward_probs(net, cube, samples, batch, stochastic ? &draw_rng : nullptr, stochastic,
                  probs.data());
    for (int64_t i = 0; i < r.n; ++i) {
      const double* p = probs.data() + i * r.k;
      double* mp = r.mean_prob.data() + i * r.k;
      double* al = r.aleatoric.data() + i * r.k * r.k;
      double* ep = r.epistemic.data() + i * r.k * r.k;
      for (int64_t a = 0; a < r.k; ++a) {
        mp[a] += p[a];
        al[a * r.k + a] += p[a];
        for (int64_t b = 0; b < r.k; ++b) {
          const double pab = p[a] * p[b];
          al[a * r.k + b] -= pab;  // accumulates diag(p) - p p^T
          ep[a * r.k + b] += pab;  // accumulates E[p p^T]
        }
      }
    }
  }

  const double inv_t = 1.0 / static_cast<double>(draws);
  for (double& v : r.mean_prob) v *= inv_t;
  for (double& v : r.aleatoric) v *= inv_t;
  for (int64_t i = 0; i < r.n; ++i) {
    const double* mp = r.mean_prob.data() + i * r.k;
    double* ep = r.epistemic.data() + i * r.k * r.k;
    for (int64_t a = 0; a < r.k; ++a) {
      for (int64_t b = 0; b < r.k; ++b) {
        ep[a * r.k + b] = ep[a * r.k + b] * inv_t - mp[a] * mp[b];
      }
    }
  }

  r.predicted = argmax_rows(r.mean_prob, r.n, r.k);
  r.var_pred.resize(static_cast<size_t>(r.n));
  r.var_trace.resize(static_cast<size_t>(r.n));
  for (int64_t i = 0; i < r.n; ++i) {
    const int64_t c = r.predicted[static_cast<size_t>(i)];
    r.var_pred[static_cast<size_t>(i)] = r.alea(i, c, c) + r.epi(i, c, c);
    double tr = 0.0;
    for (int64_t a = 0; a < r.k; ++a) tr += r.alea(i, a, a) + r.epi(i, a, a);
    r.var_trace[static_cast<size_t>(i)] = tr;
  }
  return r;
}

UncertaintyReduction reduction_from_name(const std::string& name) {
  if (name == "trace") return UncertaintyReduction::Trace;
  if (name == "predicted-class") return UncertaintyReduction::PredictedClass;
  throw InputError(cat("unknown uncertainty reduction '", name, "'"));
}

std::vector<double> scalar_uncertainty(const EnsembleResult& result, UncertaintyReduction red) {
  return red == UncertaintyReduction::Trace ? result.var_trace : result.var_pred;
}

const char* filter_policy_name(FilterPolicy policy) {
  return policy == FilterPolicy::MostUncertain ? "most-uncertain" : "random";
}

std::vector<double> default_filter_fractions() {
  std::vector<double> fractions;
  for (int i = 0; i <= 10; ++i) fractions.push_back(static_cast<double>(i) * 0.05);
  return fractions;
}

std::vector<FilterPoint> uncertainty_filter_curve(const std::vector<double>& uncertainty,
                                                  const std::vector<int32_t>& predicted,
                                                  const std::vector<int32_t>& labels,
                                                  int64_t n_classes,
                                                  const std::vector<double>& fractions,
                                                  FilterPolicy policy, uint64_t seed) {
  const int64_t n = static_cast<int64_t>(uncertainty.size());
  if (n == 0) throw InputError("filter curve: no samples");
  if (static_cast<int64_t>(predicted.size()) != n ||
      static_cast<int64_t>(labels.size()) != n) {
    throw InputError("filter curve: uncertainty, prediction and label counts differ");
  }
  if (n_classes < 1) throw InputError("filter curve: need at least one class");

  // Drop order. Uncertainty ties break by index so the curve is stable.
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  if (policy == FilterPolicy::MostUncertain) {
    std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
      const double ua = uncertainty[static_cast<size_t>(a)];
      const double ub = uncertainty[static_cast<size_t>(b)];
      return ua != ub ? ua > ub : a < b;
    });
  } else {
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());
  }

  std::vector<FilterPoint> curve;
  for (double f : fractions) {
    if (!(f >= 0.0 && f < 1.0)) {
      throw InputError(cat("filter curve: fraction ", f, " outside [0, 1)"));
    }
    const int64_t n_drop = std::llround(f * static_cast<double>(n));
    std::vector<int32_t> kept_ref, kept_pred;
    kept_ref.reserve(static_cast<size_t>(n - n_drop));
    kept_pred.reserve(static_cast<size_t>(n - n_drop));
    for (int64_t pos = n_drop; pos < n; ++pos) {
      const int64_t i = order[static_cast<size_t>(pos)];
      kept_ref.push_back(labels[static_cast<size_t>(i)]);
      kept_pred.push_back(predicted[static_cast<size_t>(i)]);
    }
    const Confusion cm = confusion_matrix(kept_ref, kept_pred, n_classes);
    FilterPoint pt;
    pt.fraction = f;
    pt.policy = policy;
    pt.kept = n - n_drop;
    pt.kappa = kappa(cm);
    pt.oa = overall_accuracy(cm);
    curve.push_back(pt);
  }
  return curve;
}

}  // namespace bhsrs
