#include "bhsrs/layers.hpp"

#include <cmath>

namespace bhsrs {
namespace {

// Variance shift that keeps sqrt differentiable when conv(x^2, sigma^2)
// underflows to zero.
constexpr double kVarianceFloor = 1e-16;

Tensor sampled(const Tensor& mean_out, const Tensor& var_out, Rng* rng) {
  Tensor stddev = sqrt(add_scalar(var_out, kVarianceFloor));
  Tensor eps = Tensor::randn(stddev.shape(), *rng);
  return add(mean_out, mul(eps, stddev));
}

VariationalParam make_variational(Shape shape, double mu_stddev, Rng& rng, double init_rho,
                                  bool zero_mean) {
  VariationalParam p;
  p.mu = zero_mean ? Tensor::zeros(shape, true) : Tensor::randn(shape, rng, 0.0, mu_stddev, true);
  p.rho = Tensor::full(std::move(shape), init_rho, true);
  return p;
}

}  // namespace

double softplus_inverse(double sigma) {
  if (!(sigma > 0.0)) throw InputError(cat("softplus_inverse: sigma must be positive, got ", sigma));
  // ln(e^sigma - 1); expm1 keeps precision for small sigma.
  return std::log(std::expm1(sigma));
}

Tensor kl_diag_gaussian(const Tensor& mu, const Tensor& rho, double prior_sigma) {
  if (mu.shape() != rho.shape()) {
    throw ShapeError(cat("kl_diag_gaussian: mu ", shape_str(mu.shape()), " vs rho ",
                         shape_str(rho.shape())));
  }
  if (!(prior_sigma > 0.0)) {
    throw InputError(cat("kl_diag_gaussian: prior sigma must be positive, got ", prior_sigma));
  }
  Tensor sigma = softplus(rho);
  // sum[ ln(sp/sigma) + (sigma^2 + mu^2) / (2 sp^2) - 1/2 ]
  Tensor neg_log_sigma = mul_scalar(sum(log(sigma)), -1.0);
  Tensor moment = mul_scalar(add(sum(square(sigma)), sum(square(mu))),
                             1.0 / (2.0 * prior_sigma * prior_sigma));
  const double n = static_cast<double>(mu.numel());
  return add_scalar(add(neg_log_sigma, moment), n * (std::log(prior_sigma) - 0.5));
}

VarConv2d::VarConv2d(int64_t in_ch, int64_t out_ch, int64_t k, Rng& rng, double init_rho) {
  const double fan_in = static_cast<double>(in_ch * k * k);
  w = make_variational({out_ch, in_ch, k, k}, std::sqrt(2.0 / fan_in), rng, init_rho, false);
  b = make_variational({out_ch}, 0.0, rng, init_rho, true);
}

Tensor VarConv2d::forward(const Tensor& x, Rng* rng, bool stochastic) const {
  if (!stochastic) return conv2d(x, w.mu, b.mu);
  if (rng == nullptr) throw UsageError("stochastic forward needs an rng");
  Tensor mean_out = conv2d(x, w.mu, b.mu);
  // Activation variance: the bias variance enters as the "bias" of the
  // variance convolution, adding per output channel.
  Tensor var_out = conv2d(square(x), square(softplus(w.rho)), square(softplus(b.rho)));
  return sampled(mean_out, var_out, rng);
}

Tensor VarConv2d::kl(double prior_sigma) const {
  return add(kl_diag_gaussian(w.mu, w.rho, prior_sigma),
             kl_diag_gaussian(b.mu, b.rho, prior_sigma));
}

VarLinear::VarLinear(int64_t in_dim, int64_t out_dim, Rng& rng, double init_rho) {
  w = make_variational({out_dim, in_dim}, std::sqrt(2.0 / static_cast<double>(in_dim)), rng,
                       init_rho, false);
  b = make_variational({out_dim}, 0.0, rng, init_rho, true);
}

Tensor VarLinear::forward(const Tensor& x, Rng* rng, bool stochastic) const {
  if (!stochastic) return linear(x, w.mu, b.mu);
  if (rng == nullptr) throw UsageError("stochastic forward needs an rng");
  Tensor mean_out = linear(x, w.mu, b.mu);
  Tensor var_out = linear(square(x), square(softplus(w.rho)), square(softplus(b.rho)));
  return sampled(mean_out, var_out, rng);
}

Tensor VarLinear::kl(double prior_sigma) const {
  return add(kl_diag_gaussian(w.mu, w.rho, prior_sigma),
             kl_diag_gaussian(b.mu, b.rho, prior_sigma));
}

Conv2d::Conv2d(int64_t in_ch, int64_t out_ch, int64_t k, Rng& rng) {
  const double fan_in = static_cast<double>(in_ch * k * k);
  w = Tensor::randn({out_ch, in_ch, k, k}, rng, 0.0, std::sqrt(2.0 / fan_in), true);
  b = Tensor::zeros({out_ch}, true);
}

Linear::Linear(int64_t in_dim, int64_t out_dim, Rng& rng) {
  w = Tensor::randn({out_dim, in_dim}, rng, 0.0, std::sqrt(2.0 / static_cast<double>(in_dim)),
                    true);
  b = Tensor::zeros({out_dim}, true);
}

LayerNorm::LayerNorm(Shape normalized_shape, double eps) : eps_(eps) {
  gain = Tensor::full(normalized_shape, 1.0, true);
  offset = Tensor::zeros(std::move(normalized_shape), true);
}

std::string mode_name(Mode m) { return m == Mode::BNN ? "bnn" : "cnn"; }

Mode mode_from_name(const std::string& name) {
  if (name == "bnn") return Mode::BNN;
  if (name == "cnn") return Mode::CNN;
  throw InputError(cat("unknown mode '", name, "' (want 'bnn' or 'cnn')"));
}

Network::Network(NetworkConfig config, Rng& rng) : config_(std::move(config)) {
  if (config_.in_channels < 1) throw InputError("network: in_channels must be at least 1");
  if (config_.n_classes < 2) throw InputError("network: need at least 2 classes");
  if (config_.widths.empty()) throw InputError("network: widths must not be empty");
  int64_t side = config_.patch;
  int64_t ch = config_.in_channels;
  for (size_t i = 0; i < config_.widths.size(); ++i) {
    const int64_t width = config_.widths[i];
    if (width < 1) throw InputError("network: widths must be positive");
    if (config_.mode == Mode::BNN) {
      vconvs_.emplace_back(ch, width, config_.kernel, rng, config_.init_rho);
    } else {
      convs_.emplace_back(ch, width, config_.kernel, rng);
    }
    side -= config_.kernel - 1;
    if (side < 1) {
      throw InputError(cat("network: patch ", config_.patch, " too small for ",
                           config_.widths.size(), " conv blocks of kernel ", config_.kernel));
    }
    ch = width;
    lns_.emplace_back(Shape{width, side, side}, config_.ln_eps);
  }
  flat_dim_ = ch * side * side;
  if (config_.mode == Mode::BNN) {
    vdense_ = VarLinear(flat_dim_, config_.n_classes, rng, config_.init_rho);
  } else {
    dense_ = Linear(flat_dim_, config_.n_classes, rng);
  }
}

Tensor Network::forward(const Tensor& x, Rng* rng, bool stochastic) const {
  if (x.shape().size() != 4 || x.dim(1) != config_.in_channels || x.dim(2) != config_.patch ||
      x.dim(3) != config_.patch) {
    throw ShapeError(cat("network: want input [N, ", config_.in_channels, ", ", config_.patch,
                         ", ", config_.patch, "], got ", shape_str(x.shape())));
  }
  const bool bnn = config_.mode == Mode::BNN;
  Tensor h = x;
  for (size_t i = 0; i < lns_.size(); ++i) {
    h = bnn ? vconvs_[i].forward(h, rng, stochastic) : convs_[i].forward(h);
    h = bnn ? softplus(h) : relu(h);
    h = lns_[i].forward(h);
  }
  h = flatten2d(h);
  Tensor logits = bnn ? vdense_.forward(h, rng, stochastic) : dense_.forward(h);
  return log_softmax(logits);
}

Tensor Network::kl() const {
  if (config_.mode != Mode::BNN) throw UsageError("kl() is only defined for BNN mode");
  Tensor total = vconvs_[0].kl(config_.prior_sigma);
  for (size_t i = 1; i < vconvs_.size(); ++i) {
    total = add(total, vconvs_[i].kl(config_.prior_sigma));
  }
  return add(total, vdense_.kl(config_.prior_sigma));
}

std::vector<std::pair<std::string, Tensor>> Network::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  const bool bnn = config_.mode == Mode::BNN;
  for (size_t i = 0; i < lns_.size(); ++i) {
    const std::string prefix = cat("block", i + 1, ".");
    if (bnn) {
      out.emplace_back(prefix + "conv.w_mu", vconvs_[i].w.mu);
      out.emplace_back(prefix + "conv.w_rho", vconvs_[i].w.rho);
      out.emplace_back(prefix + "conv.b_mu", vconvs_[i].b.mu);
      out.emplace_back(prefix + "conv.b_rho", vconvs_[i].b.rho);
    } else {
      out.emplace_back(prefix + "conv.w", convs_[i].w);
      out.emplace_back(prefix + "conv.b", convs_[i].b);
    }
    out.emplace_back(prefix + "ln.gain", lns_[i].gain);
    out.emplace_back(prefix + "ln.offset", lns_[i].offset);
  }
  if (bnn) {
    out.emplace_back("dense.w_mu", vdense_.w.mu);
    out.emplace_back("dense.w_rho", vdense_.w.rho);
    out.emplace_back("dense.b_mu", vdense_.b.mu);
    out.emplace_back("dense.b_rho", vdense_.b.rho);
  } else {
    out.emplace_back("dense.w", dense_.w);
    out.emplace_back("dense.b", dense_.b);
  }
  return out;
}

std::vector<Network::Prunable> Network::prunable() const {
  std::vector<Prunable> out;
  const bool bnn = config_.mode == Mode::BNN;
  for (size_t i = 0; i < lns_.size(); ++i) {
    const std::string name = cat("block", i + 1, ".conv.w");
    if (bnn) {
      out.push_back({name, vconvs_[i].w.mu, vconvs_[i].w.rho});
    } else {
      out.push_back({name, convs_[i].w, Tensor()});
    }
  }
  if (bnn) {
    out.push_back({"dense.w", vdense_.w.mu, vdense_.w.rho});
  } else {
    out.push_back({"dense.w", dense_.w, Tensor()});
  }
  return out;
}

Network Network::clone() const {
  Rng scratch(0);
  Network copy(config_, scratch);
  auto src = named_params();
  auto dst = copy.named_params();
  for (size_t i = 0; i < src.size(); ++i) dst[i].second.vec() = src[i].second.vec();
  return copy;
}

}  // namespace bhsrs
