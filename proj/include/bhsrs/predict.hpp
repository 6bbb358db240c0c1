#pragma once

#include <cstdint>
#include <vector>

#include "bhsrs/layers.hpp"
#include "bhsrs/patches.hpp"

namespace bhsrs {

// Ensemble prediction with the two uncertainty components of the predictive
// covariance. For a stochastic network, `draws` forward passes are averaged;
// a point-estimate network collapses to one deterministic pass, making the
// epistemic part exactly zero.
//
//   aleatoric[i] = mean_t( diag(p_t) - p_t p_t^T )   data noise
//   epistemic[i] = mean_t( p_t p_t^T ) - p p^T       model disagreement
//
// Both are k x k per sample; their sum is the predictive covariance. The
// scalar summaries are the variance at the predicted class and the trace.
struct EnsembleResult {
  int64_t n = 0;
  int64_t k = 0;
  int64_t draws = 0;
  std::vector<double> mean_prob;    // n x k
  std::vector<double> aleatoric;    // n x k x k
  std::vector<double> epistemic;    // n x k x k
  std::vector<int32_t> predicted;   // argmax of mean_prob
  std::vector<double> var_pred;     // total variance at the predicted class
  std::vector<double> var_trace;    // trace of the total covariance

  double alea(int64_t i, int64_t a, int64_t b) const { return aleatoric[(i * k + a) * k + b]; }
  double epi(int64_t i, int64_t a, int64_t b) const { return epistemic[(i * k + a) * k + b]; }
};

// The two components computed from explicit per-draw probability rows
// (draws x k, row-major) by their defining formulas. predict_ensemble uses
// a streaming rearrangement; this is the reference the tests hold it to.
struct DrawStats {
  std::vector<double> mean;  // k
  std::vector<double> alea;  // k x k
  std::vector<double> epi;   // k x k
};
DrawStats uncertainty_from_draws(const std::vector<double>& draw_probs, int64_t draws, int64_t k);

// Patches are cut from the cube per chunk of `batch` samples. The per-draw
// noise stream is derived from (seed, draw index) only, but noise positions
// align with samples chunk by chunk, so `batch` is part of the determinism
// contract: same seed, draws and batch give identical output.
EnsembleResult predict_ensemble(const Network& net, const FeatureCube& cube,
                                const std::vector<Sample>& samples, int64_t draws, uint64_t seed,
                                int64_t batch = 64);

// Single deterministic pass through the posterior means (or plain weights):
// class probabilities only, n x k.
std::vector<double> predict_mean(const Network& net, const FeatureCube& cube,
                                 const std::vector<Sample>& samples, int64_t batch = 64);

std::vector<int32_t> argmax_rows(const std::vector<double>& probs, int64_t n, int64_t k);

// Collapse of the per-sample covariance to one number for ranking and maps.
enum class UncertaintyReduction { Trace, PredictedClass };
UncertaintyReduction reduction_from_name(const std::string& name);
std::vector<double> scalar_uncertainty(const EnsembleResult& result, UncertaintyReduction red);

// Which samples get discarded when a fraction is filtered away.
enum class FilterPolicy { MostUncertain, Random };
const char* filter_policy_name(FilterPolicy policy);

// 0, 0.05, ..., 0.5: the grid the filtering experiment sweeps.
std::vector<double> default_filter_fractions();

// Agreement metrics of the retained samples after dropping round(f*n) of
// them, highest uncertainty first or a seeded random subset. Drop sets are
// nested across fractions under both policies.
struct FilterPoint {
  double fraction = 0.0;
  FilterPolicy policy = FilterPolicy::MostUncertain;
  int64_t kept = 0;
  double kappa = 0.0;
  double oa = 0.0;
};

std::vector<FilterPoint> uncertainty_filter_curve(const std::vector<double>& uncertainty,
                                                  const std::vector<int32_t>& predicted,
                                                  const std::vector<int32_t>& labels,
                                                  int64_t n_classes,
                                                  const std::vector<double>& fractions,
                                                  FilterPolicy policy, uint64_t seed);

}  // namespace bhsrs
