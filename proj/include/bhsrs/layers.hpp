#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bhsrs/ops.hpp"
#include "bhsrs/rng.hpp"
#include "bhsrs/tensor.hpp"

namespace bhsrs {

// sigma = softplus(rho) keeps posterior scales positive everywhere the
// optimizer can reach. softplus_inverse recovers the rho that produces a
// given sigma (used by tests and by KL identities).
double softplus_inverse(double sigma);

// Closed-form KL( N(mu, softplus(rho)^2) || N(0, prior_sigma^2) ), summed
// over all coordinates. Differentiable with respect to mu and rho.
Tensor kl_diag_gaussian(const Tensor& mu, const Tensor& rho, double prior_sigma);

// Weight or bias with a factorized Gaussian posterior.
struct VariationalParam {
  Tensor mu;
  Tensor rho;
};

// Convolution whose weights are distributions. The stochastic forward uses
// the local reparameterization trick: it samples the pre-activations
//   out = conv(x, mu) + eps (.) sqrt(conv(x^2, sigma^2) + 1e-16)
// with one fresh standard-normal eps per activation, instead of sampling
// weight tensors. The mean forward (stochastic = false) is conv(x, mu).
class VarConv2d {
 public:
  VarConv2d() = default;
  VarConv2d(int64_t in_ch, int64_t out_ch, int64_t k, Rng& rng, double init_rho);

  Tensor forward(const Tensor& x, Rng* rng, bool stochastic) const;
  Tensor kl(double prior_sigma) const;

  VariationalParam w;  // [out_ch, in_ch, k, k]
  VariationalParam b;  // [out_ch]
};

class VarLinear {
 public:
  VarLinear() = default;
  VarLinear(int64_t in_dim, int64_t out_dim, Rng& rng, double init_rho);

  Tensor forward(const Tensor& x, Rng* rng, bool stochastic) const;
  Tensor kl(double prior_sigma) const;

  VariationalParam w;  // [out_dim, in_dim]
  VariationalParam b;  // [out_dim]
};

// Frequentist counterparts used in CNN mode.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int64_t in_ch, int64_t out_ch, int64_t k, Rng& rng);
  Tensor forward(const Tensor& x) const { return conv2d(x, w, b); }
  Tensor w, b;
};

class Linear {
 public:
  Linear() = default;
  Linear(int64_t in_dim, int64_t out_dim, Rng& rng);
  Tensor forward(const Tensor& x) const { return linear(x, w, b); }
  Tensor w, b;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  // One gain/offset per normalized element (everything but the batch axis).
  explicit LayerNorm(Shape normalized_shape, double eps = 1e-5);
  Tensor forward(const Tensor& x) const { return layer_norm(x, gain, offset, eps_); }
  Tensor gain, offset;
  double eps() const { return eps_; }

 private:
  double eps_ = 1e-5;
};

enum class Mode { BNN, CNN };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

struct NetworkConfig {
  Mode mode = Mode::BNN;
  int64_t in_channels = 0;  // feature bands per patch
  int64_t n_classes = 0;
  int64_t patch = 9;
  int64_t kernel = 3;
  std::vector<int64_t> widths = {128, 256, 512};
  double prior_sigma = 0.1;
  double init_rho = -5.0;
  double ln_eps = 1e-5;
};

// Patch classifier: three valid 3x3 conv blocks (conv, activation, layer
// norm) that shrink a 9x9 patch to 3x3, then flatten and a dense layer into
// log-class-probabilities. BNN mode uses variational conv/dense layers with
// softplus activations; CNN mode uses point-estimate layers with ReLU.
class Network {
 public:
  Network(NetworkConfig config, Rng& rng);

  // x: [N, in_channels, patch, patch] -> log-probabilities [N, n_classes].
  // rng is required when stochastic (BNN draws); CNN mode ignores both flags.
  Tensor forward(const Tensor& x, Rng* rng = nullptr, bool stochastic = false) const;

  // Sum of the per-layer KL terms (BNN mode only; UsageError otherwise).
  Tensor kl() const;

  // Parameters in a fixed, documented order (the checkpoint order).
  std::vector<std::pair<std::string, Tensor>> named_params() const;

  // Weight tensors eligible for pruning (conv + dense weights; biases and
  // layer norm excluded). For BNN entries rho is defined, for CNN it is not.
  struct Prunable {
    std::string name;
    Tensor w_or_mu;
    Tensor rho;
  };
  std::vector<Prunable> prunable() const;

  const NetworkConfig& config() const { return config_; }
  // Flattened feature count entering the dense layer.
  int64_t flat_dim() const { return flat_dim_; }

  Network clone() const;

 private:
  NetworkConfig config_;
  int64_t flat_dim_ = 0;

  std::vector<VarConv2d> vconvs_;
  VarLinear vdense_;
  std::vector<Conv2d> convs_;
  Linear dense_;
  std::vector<LayerNorm> lns_;
};

}  // namespace bhsrs
