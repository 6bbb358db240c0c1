#pragma once

#include <vector>

#include "bhsrs/tensor.hpp"

namespace bhsrs {

// Differentiable tensor ops. Each op computes its forward result eagerly and,
// when a tape is active and an input requires grad, records a closure that
// accumulates (+=) into the inputs' grad buffers. Inputs are validated with
// ShapeError / InputError before any work.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor square(const Tensor& a);
// Elementwise square root. Negative inputs produce NaN, which the finite
// checks turn into InternalError; callers are responsible for shifting
// variances away from zero before taking the root.
Tensor sqrt(const Tensor& a);
Tensor log(const Tensor& a);
// softplus(x) = (1/beta) * ln(1 + exp(beta*x)), computed in the
// overflow-free form max(x,0) + (1/beta)*log1p(exp(-beta*|x|)).
Tensor softplus(const Tensor& a, double beta = 1.0);
Tensor relu(const Tensor& a);

// Full reduction to a one-element tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Copies into a new shape with the same number of elements.
Tensor reshape(const Tensor& a, Shape shape);
// [N, d1, d2, ...] -> [N, d1*d2*...]
Tensor flatten2d(const Tensor& a);

// Valid cross-correlation, stride 1, no padding.
// x: [N, C, H, W], w: [F, C, kh, kw], optional bias [F].
// out: [N, F, H-kh+1, W-kw+1].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias = Tensor());

// x: [N, In], w: [Out, In], optional bias [Out]. out: [N, Out].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias = Tensor());

// Normalizes each sample over all non-batch axes to zero mean / unit
// variance (biased variance, epsilon inside the square root), then applies
// the elementwise affine map gain * xhat + offset. gain and offset have one
// value per normalized element.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset, double eps = 1e-5);

// Log of the softmax over the last axis, computed via the max-shifted
// log-sum-exp so large logits cannot overflow.
Tensor log_softmax(const Tensor& x);

enum class Reduction { Sum, Mean };

// Negative log likelihood from log-probabilities. logp: [N, K], labels in
// [0, K). Sum or mean over the batch.
Tensor nll_loss(const Tensor& logp, const std::vector<int64_t>& labels,
                Reduction reduction = Reduction::Mean);

}  // namespace bhsrs
