#include "bhsrs/ops.hpp"

#include <cmath>
#include <cstring>

#include "bhsrs/kernels.hpp"

namespace bhsrs {
namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(cat(op, ": shape mismatch ", shape_str(a.shape()), " vs ",
                         shape_str(b.shape())));
  }
}

bool wants_grad(std::initializer_list<const Tensor*> inputs) {
  if (!tracing()) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

double* acc(const std::shared_ptr<TensorImpl>& t) { return detail::ensure_grad(*t).data(); }

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  bool rg = wants_grad({&a, &b});
  Tensor out = make_tensor(a.shape(), rg);
  kern::add(a.data(), b.data(), out.data(), out.numel());
  detail::check_finite(*out.impl(), "add");
  if (rg) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, bi, oi] {
      const auto& g = oi->grad;
      int64_t n = static_cast<int64_t>(g.size());
      if (ai->requires_grad) kern::axpy(1.0, g.data(), acc(ai), n);
      if (bi->requires_grad) kern::axpy(1.0, g.data(), acc(bi), n);
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  bool rg = wants_grad({&a, &b});
  Tensor out = make_tensor(a.shape(), rg);
  kern::sub(a.data(), b.data(), out.data(), out.numel());
  detail::check_finite(*out.impl(), "sub");
  if (rg) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, bi, oi] {
      const auto& g = oi->grad;
      int64_t n = static_cast<int64_t>(g.size());
      if (ai->requires_grad) kern::axpy(1.0, g.data(), acc(ai), n);
      if (bi->requires_grad) kern::axpy(-1.0, g.data(), acc(bi), n);
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  bool rg = wants_grad({&a, &b});
  Tensor out = make_tensor(a.shape(), rg);
  kern::mul(a.data(), b.data(), out.data(), out.numel());
  detail::check_finite(*out.impl(), "mul");
  if (rg) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, bi, oi] {
      const auto& g = oi->grad;
      int64_t n = static_cast<int64_t>(g.size());
      if (ai->requires_grad) kern::mul_acc(g.data(), bi->data.data(), acc(ai), n);
      if (bi->requires_grad) kern::mul_acc(g.data(), ai->data.data(), acc(bi), n);
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double c) {
  bool rg = wants_grad({&a});
  Tensor out = make_tensor(a.shape(), rg);
  kern::add_scalar(c, a.data(), out.data(), out.numel());
  detail::check_finite(*out.impl(), "add_scalar");
  if (rg) {
    auto ai = a.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, oi] {
      kern::axpy(1.0, oi->grad.data(), acc(ai), static_cast<int64_t>(oi->grad.size()));
    });
  }
  return out;
}

Tensor mul_scalar(const Tensor& a, double c) {
  bool rg = wants_grad({&a});
  Tensor out = make_tensor(a.shape(), rg);
  kern::scale(c, a.data(), out.data(), out.numel());
  detail::check_finite(*out.impl(), "mul_scalar");
  if (rg) {
    auto ai = a.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, oi, c] {
      kern::axpy(c, oi->grad.data(), acc(ai), static_cast<int64_t>(oi->grad.size()));
    });
  }
  return out;
}

Tensor square(const Tensor& a) {
  bool rg = wants_grad({&a});
  Tensor out = make_tensor(a.shape(), rg);
  kern::mul(a.data(), a.data(), out.data(), out.numel());
  detail::check_finite(*out.impl(), "square");
  if (rg) {
    auto ai = a.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, oi] {
      const auto& g = oi->grad;
      double* ga = acc(ai);
      const double* x = ai->data.data();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * x[i] * g[i];
    });
  }
  return out;
}

Tensor sqrt(const Tensor& a) {
  bool rg = wants_grad({&a});
  Tensor out = make_tensor(a.shape(), rg);
  kern::sqrt_ew(a.data(), out.data(), out.numel());
  detail::check_finite(*out.impl(), "sqrt");
  if (rg) {
    auto ai = a.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, oi] {
      const auto& g = oi->grad;
      double* ga = acc(ai);
      const double* y = oi->data.data();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += 0.5 * g[i] / y[i];
    });
  }
  return out;
}

Tensor log(const Tensor& a) {
  bool rg = wants_grad({&a});
  Tensor out = make_tensor(a.shape(), rg);
  const double* x = a.data();
  double* y = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) y[i] = std::log(x[i]);
  detail::check_finite(*out.impl(), "log");
  if (rg) {
    auto ai = a.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, oi] {
      const auto& g = oi->grad;
      double* ga = acc(ai);
      const double* x = ai->data.data();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
    });
  }
  return out;
}

Tensor softplus(const Tensor& a, double beta) {
  if (beta <= 0.0) throw InputError(cat("softplus: beta must be positive, got ", beta));
  bool rg = wants_grad({&a});
  Tensor out = make_tensor(a.shape(), rg);
  const double* x = a.data();
  double* y = out.data();
  for (int64_t i = 0; i < out.numel(); ++i) {
    double v = x[i];
    y[i] = std::max(v, 0.0) + std::log1p(std::exp(-beta * std::fabs(v))) / beta;
  }
  detail::check_finite(*out.impl(), "softplus");
  if (rg) {
    auto ai = a.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, oi, beta] {
      const auto& g = oi->grad;
      double* ga = acc(ai);
      const double* x = ai->data.data();
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * stable_sigmoid(beta * x[i]);
    });
  }
  return out;
}

Tensor relu(const Tensor& a) {
  bool rg = wants_grad({&a});
  Tensor out = make_tensor(a.shape(), rg);
  kern::relu(a.data(), out.data(), out.numel());
  detail::check_finite(*out.impl(), "relu");
  if (rg) {
    auto ai = a.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, oi] {
      const auto& g = oi->grad;
      double* ga = acc(ai);
      const double* x = ai->data.data();
      for (size_t i = 0; i < g.size(); ++i) {
        if (x[i] > 0.0) ga[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& a) {
  bool rg = wants_grad({&a});
  Tensor out = make_tensor({1}, rg);
  out.data()[0] = kern::sum(a.data(), a.numel());
  detail::check_finite(*out.impl(), "sum");
  if (rg) {
    auto ai = a.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, oi] {
      double g = oi->grad[0];
      double* ga = acc(ai);
      for (size_t i = 0; i < ai->data.size(); ++i) ga[i] += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw UsageError("mean of an empty tensor");
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError(cat("reshape: cannot view ", shape_str(a.shape()), " as ",
                         shape_str(shape)));
  }
  bool rg = wants_grad({&a});
  Tensor out = make_tensor(std::move(shape), rg);
  out.vec() = a.vec();
  if (rg) {
    auto ai = a.impl(), oi = out.impl();
    Tape::active()->record(oi, [ai, oi] {
      kern::axpy(1.0, oi->grad.data(), acc(ai), static_cast<int64_t>(oi->grad.size()));
    });
  }
  return out;
}

Tensor flatten2d(const Tensor& a) {
  if (a.shape().size() < 2) {
    throw ShapeError(cat("flatten2d: rank >= 2 required, got ", shape_str(a.shape())));
  }
  int64_t n = a.dim(0);
  return reshape(a, {n, a.numel() / std::max<int64_t>(n, 1)});
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.shape().size() != 4 || w.shape().size() != 4) {
    throw ShapeError(cat("conv2d: want x [N,C,H,W] and w [F,C,kh,kw], got ",
                         shape_str(x.shape()), " and ", shape_str(w.shape())));
  }
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != C) {
    throw ShapeError(cat("conv2d: input has ", C, " channels but weights expect ", w.dim(1)));
  }
  const int64_t OH = H - kh + 1, OW = W - kw + 1;
  if (OH <= 0 || OW <= 0) {
    throw ShapeError(cat("conv2d: kernel ", kh, "x", kw, " larger than input ", H, "x", W));
  }
  if (bias.defined() && (bias.shape().size() != 1 || bias.dim(0) != F)) {
    throw ShapeError(cat("conv2d: bias must be [", F, "], got ", shape_str(bias.shape())));
  }

  // Patches are gathered once into rows of length K = C*kh*kw so both the
  // forward pass and every backward contraction become long dot/axpy calls.
  const int64_t K = C * kh * kw;
  const int64_t R = N * OH * OW;
  auto cols = std::make_shared<std::vector<double>>(static_cast<size_t>(R * K));
  {
    double* cp = cols->data();
    const double* xp = x.data();
    parallel_for(R, [&](int64_t r0, int64_t r1) {
      for (int64_t r = r0; r < r1; ++r) {
        const int64_t n = r / (OH * OW);
        const int64_t oh = (r / OW) % OH;
        const int64_t ow = r % OW;
        double* row = cp + r * K;
        for (int64_t c = 0; c < C; ++c) {
          for (int64_t i = 0; i < kh; ++i) {
            const double* src = xp + ((n * C + c) * H + oh + i) * W + ow;
            std::memcpy(row + (c * kh + i) * kw, src, sizeof(double) * kw);
          }
        }
      }
    });
  }

  bool rg = wants_grad({&x, &w, &bias});
  Tensor out = make_tensor({N, F, OH, OW}, rg);
  {
    double* op = out.data();
    const double* wp = w.data();
    const double* bp = bias.defined() ? bias.data() : nullptr;
    const double* cp = cols->data();
    const int64_t plane = OH * OW;
    parallel_for(R, [&](int64_t r0, int64_t r1) {
      for (int64_t r = r0; r < r1; ++r) {
        const int64_t n = r / plane;
        const int64_t px = r % plane;
        const double* row = cp + r * K;
        for (int64_t f = 0; f < F; ++f) {
          double v = kern::dot(wp + f * K, row, K);
          if (bp != nullptr) v += bp[f];
          op[(n * F + f) * plane + px] = v;
        }
      }
    });
  }
  detail::check_finite(*out.impl(), "conv2d");

  if (rg) {
    auto xi = x.impl(), wi = w.impl(), oi = out.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    Tape::active()->record(oi, [xi, wi, bi, oi, cols, N, C, H, W, F, kh, kw, OH, OW, K] {
      const int64_t plane = OH * OW;
      const int64_t R = N * plane;
      const double* gp = oi->grad.data();
      const double* cp = cols->data();
      if (wi->requires_grad) {
        double* gw = acc(wi);
        parallel_for(F, [&](int64_t f0, int64_t f1) {
          for (int64_t f = f0; f < f1; ++f) {
            for (int64_t r = 0; r < R; ++r) {
              const int64_t n = r / plane;
              const double g = gp[(n * F + f) * plane + r % plane];
              if (g != 0.0) kern::axpy(g, cp + r * K, gw + f * K, K);
            }
          }
        });
      }
      if (bi != nullptr && bi->requires_grad) {
        double* gb = acc(bi);
        for (int64_t n = 0; n < N; ++n) {
          for (int64_t f = 0; f < F; ++f) {
            gb[f] += kern::sum(gp + (n * F + f) * plane, plane);
          }
        }
      }
      if (xi->requires_grad) {
        // First pull gradients back onto the patch rows, then scatter the
        // rows into x (the inverse of the gather above, with += on overlap).
        std::vector<double> gcols(static_cast<size_t>(R * K), 0.0);
        const double* wp = wi->data.data();
        parallel_for(R, [&](int64_t r0, int64_t r1) {
          for (int64_t r = r0; r < r1; ++r) {
            const int64_t n = r / plane;
            const int64_t px = r % plane;
            double* grow = gcols.data() + r * K;
            for (int64_t f = 0; f < F; ++f) {
              const double g = gp[(n * F + f) * plane + px];
              if (g != 0.0) kern::axpy(g, wp + f * K, grow, K);
            }
          }
        });
        double* gx = acc(xi);
        parallel_for(N, [&](int64_t n0, int64_t n1) {
          for (int64_t n = n0; n < n1; ++n) {
            for (int64_t oh = 0; oh < OH; ++oh) {
              for (int64_t ow = 0; ow < OW; ++ow) {
                const int64_t r = (n * OH + oh) * OW + ow;
                const double* grow = gcols.data() + r * K;
                for (int64_t c = 0; c < C; ++c) {
                  for (int64_t i = 0; i < kh; ++i) {
                    double* dst = gx + ((n * C + c) * H + oh + i) * W + ow;
                    const double* src = grow + (c * kh + i) * kw;
                    for (int64_t j = 0; j < kw; ++j) dst[j] += src[j];
                  }
                }
              }
            }
          }
        });
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.shape().size() != 2 || w.shape().size() != 2) {
    throw ShapeError(cat("linear: want x [N,In] and w [Out,In], got ", shape_str(x.shape()),
                         " and ", shape_str(w.shape())));
  }
  const int64_t N = x.dim(0), In = x.dim(1), Out = w.dim(0);
  if (w.dim(1) != In) {
    throw ShapeError(cat("linear: x has ", In, " features but weights expect ", w.dim(1)));
  }
  if (bias.defined() && (bias.shape().size() != 1 || bias.dim(0) != Out)) {
    throw ShapeError(cat("linear: bias must be [", Out, "], got ", shape_str(bias.shape())));
  }
  bool rg = wants_grad({&x, &w, &bias});
  Tensor out = make_tensor({N, Out}, rg);
  {
    double* op = out.data();
    const double* xp = x.data();
    const double* wp = w.data();
    const double* bp = bias.defined() ? bias.data() : nullptr;
    parallel_for(N, [&](int64_t n0, int64_t n1) {
      for (int64_t n = n0; n < n1; ++n) {
        for (int64_t o = 0; o < Out; ++o) {
          double v = kern::dot(xp + n * In, wp + o * In, In);
          if (bp != nullptr) v += bp[o];
          op[n * Out + o] = v;
        }
      }
    });
  }
  detail::check_finite(*out.impl(), "linear");
  if (rg) {
    auto xi = x.impl(), wi = w.impl(), oi = out.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    Tape::active()->record(oi, [xi, wi, bi, oi, N, In, Out] {
      const double* gp = oi->grad.data();
      if (wi->requires_grad) {
        double* gw = acc(wi);
        for (int64_t n = 0; n < N; ++n) {
          const double* xrow = xi->data.data() + n * In;
          for (int64_t o = 0; o < Out; ++o) {
            const double g = gp[n * Out + o];
            if (g != 0.0) kern::axpy(g, xrow, gw + o * In, In);
          }
        }
      }
      if (bi != nullptr && bi->requires_grad) {
        double* gb = acc(bi);
        for (int64_t n = 0; n < N; ++n) {
          kern::axpy(1.0, gp + n * Out, gb, Out);
        }
      }
      if (xi->requires_grad) {
        double* gx = acc(xi);
        const double* wp = wi->data.data();
        for (int64_t n = 0; n < N; ++n) {
          for (int64_t o = 0; o < Out; ++o) {
            const double g = gp[n * Out + o];
            if (g != 0.0) kern::axpy(g, wp + o * In, gx + n * In, In);
          }
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset, double eps) {
  if (x.shape().size() < 2) {
    throw ShapeError(cat("layer_norm: rank >= 2 required, got ", shape_str(x.shape())));
  }
  const int64_t N = x.dim(0);
  const int64_t M = x.numel() / std::max<int64_t>(N, 1);
  if (gain.numel() != M || offset.numel() != M) {
    throw ShapeError(cat("layer_norm: gain/offset need ", M, " elements, got ", gain.numel(),
                         " and ", offset.numel()));
  }
  if (eps <= 0.0) throw InputError(cat("layer_norm: eps must be positive, got ", eps));

  bool rg = wants_grad({&x, &gain, &offset});
  Tensor out = make_tensor(x.shape(), rg);
  // xhat and the per-row inverse stddev are reused by the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(N * M));
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(N));
  {
    const double* xp = x.data();
    const double* gp = gain.data();
    const double* bp = offset.data();
    double* op = out.data();
    double* hp = xhat->data();
    double* ip = inv_std->data();
    parallel_for(N, [&](int64_t n0, int64_t n1) {
      for (int64_t n = n0; n < n1; ++n) {
        const double* row = xp + n * M;
        double* hrow = hp + n * M;
        const double m = kern::sum(row, M) / static_cast<double>(M);
        double var = 0.0;
        for (int64_t i = 0; i < M; ++i) {
          const double c = row[i] - m;
          hrow[i] = c;
          var += c * c;
        }
        var /= static_cast<double>(M);
        const double inv = 1.0 / std::sqrt(var + eps);
        ip[n] = inv;
        double* orow = op + n * M;
        for (int64_t i = 0; i < M; ++i) {
          hrow[i] *= inv;
          orow[i] = gp[i] * hrow[i] + bp[i];
        }
      }
    });
  }
  detail::check_finite(*out.impl(), "layer_norm");

  if (rg) {
    auto xi = x.impl(), gi = gain.impl(), bi = offset.impl(), oi = out.impl();
    Tape::active()->record(oi, [xi, gi, bi, oi, xhat, inv_std, N, M] {
      const double* g = oi->grad.data();
      const double* hp = xhat->data();
      if (gi->requires_grad) {
        double* gg = acc(gi);
        for (int64_t n = 0; n < N; ++n) {
          kern::mul_acc(g + n * M, hp + n * M, gg, M);
        }
      }
      if (bi->requires_grad) {
        double* gb = acc(bi);
        for (int64_t n = 0; n < N; ++n) {
          kern::axpy(1.0, g + n * M, gb, M);
        }
      }
      if (xi->requires_grad) {
        double* gx = acc(xi);
        const double* gainp = gi->data.data();
        std::vector<double> dxhat(static_cast<size_t>(M));
        for (int64_t n = 0; n < N; ++n) {
          const double* grow = g + n * M;
          const double* hrow = hp + n * M;
          kern::mul(grow, gainp, dxhat.data(), M);
          const double mean_d = kern::sum(dxhat.data(), M) / static_cast<double>(M);
          const double mean_dh = kern::dot(dxhat.data(), hrow, M) / static_cast<double>(M);
          const double inv = (*inv_std)[n];
          double* gxrow = gx + n * M;
          for (int64_t i = 0; i < M; ++i) {
            gxrow[i] += inv * (dxhat[i] - mean_d - hrow[i] * mean_dh);
          }
        }
      }
    });
  }
  return out;
}

Tensor log_softmax(const Tensor& x) {
  if (x.shape().empty()) throw ShapeError("log_softmax: rank >= 1 required");
  const int64_t K = x.dim(-1);
  if (K < 1) throw ShapeError("log_softmax: last axis is empty");
  const int64_t R = x.numel() / K;
  bool rg = wants_grad({&x});
  Tensor out = make_tensor(x.shape(), rg);
  {
    const double* xp = x.data();
    double* op = out.data();
    parallel_for(R, [&](int64_t r0, int64_t r1) {
      for (int64_t r = r0; r < r1; ++r) {
        const double* row = xp + r * K;
        double m = row[0];
        for (int64_t k = 1; k < K; ++k) m = std::max(m, row[k]);
        double s = 0.0;
        for (int64_t k = 0; k < K; ++k) s += std::exp(row[k] - m);
        const double lse = m + std::log(s);
        double* orow = op + r * K;
        for (int64_t k = 0; k < K; ++k) orow[k] = row[k] - lse;
      }
    });
  }
  detail::check_finite(*out.impl(), "log_softmax");
  if (rg) {
    auto xi = x.impl(), oi = out.impl();
    Tape::active()->record(oi, [xi, oi, R, K] {
      const double* g = oi->grad.data();
      const double* o = oi->data.data();
      double* gx = acc(xi);
      for (int64_t r = 0; r < R; ++r) {
        const double gsum = kern::sum(g + r * K, K);
        for (int64_t k = 0; k < K; ++k) {
          gx[r * K + k] += g[r * K + k] - std::exp(o[r * K + k]) * gsum;
        }
      }
    });
  }
  return out;
}

Tensor nll_loss(const Tensor& logp, const std::vector<int64_t>& labels, Reduction reduction) {
  if (logp.shape().size() != 2) {
    throw ShapeError(cat("nll_loss: want log-probabilities [N,K], got ", shape_str(logp.shape())));
  }
  const int64_t N = logp.dim(0), K = logp.dim(1);
  if (static_cast<int64_t>(labels.size()) != N) {
    throw InputError(cat("nll_loss: ", N, " rows but ", labels.size(), " labels"));
  }
  for (int64_t i = 0; i < N; ++i) {
    if (labels[i] < 0 || labels[i] >= K) {
      throw InputError(cat("nll_loss: label ", labels[i], " at row ", i, " outside [0, ", K, ")"));
    }
  }
  if (N == 0) throw InputError("nll_loss: empty batch");
  const double scale = reduction == Reduction::Mean ? 1.0 / static_cast<double>(N) : 1.0;
  bool rg = wants_grad({&logp});
  Tensor out = make_tensor({1}, rg);
  {
    const double* lp = logp.data();
    double s = 0.0;
    for (int64_t i = 0; i < N; ++i) s += lp[i * K + labels[i]];
    out.data()[0] = -scale * s;
  }
  detail::check_finite(*out.impl(), "nll_loss");
  if (rg) {
    auto li = logp.impl(), oi = out.impl();
    auto labels_copy = std::make_shared<std::vector<int64_t>>(labels);
    Tape::active()->record(oi, [li, oi, labels_copy, K, scale] {
      const double g = oi->grad[0];
      double* gl = acc(li);
      for (size_t i = 0; i < labels_copy->size(); ++i) {
        gl[i * K + (*labels_copy)[i]] -= scale * g;
      }
    });
  }
  return out;
}

}  // namespace bhsrs
