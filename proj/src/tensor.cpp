#include "bhsrs/tensor.hpp"

#include <cmath>

namespace bhsrs {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d < 0) throw ShapeError(cat("negative axis length in shape ", shape_str(s)));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

TensorImpl& Tensor::check() const {
  if (!impl_) throw UsageError("operation on default-constructed tensor");
  return *impl_;
}

Tensor make_tensor(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data.assign(shape_numel(impl->shape), 0.0);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return make_tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = make_tensor(std::move(shape), requires_grad);
  for (double& v : t.vec()) v = value;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw ShapeError(cat("from_data: shape ", shape_str(shape), " wants ", shape_numel(shape),
                         " values, got ", data.size()));
  }
  Tensor t = make_tensor(std::move(shape), requires_grad);
  t.vec() = std::move(data);
  return t;
}

Tensor Tensor::randn(Shape shape, Rng& rng, double mean, double stddev, bool requires_grad) {
  Tensor t = make_tensor(std::move(shape), requires_grad);
  for (double& v : t.vec()) v = rng.normal(mean, stddev);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

int64_t Tensor::dim(int axis) const {
  const Shape& s = shape();
  int rank = static_cast<int>(s.size());
  int i = axis < 0 ? rank + axis : axis;
  if (i < 0 || i >= rank) {
    throw ShapeError(cat("axis ", axis, " out of range for shape ", shape_str(s)));
  }
  return s[i];
}

double Tensor::item() const {
  if (numel() != 1) {
    throw UsageError(cat("item() on tensor of shape ", shape_str(shape())));
  }
  return data()[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  check().requires_grad = on;
  return *this;
}

double* Tensor::grad_data() { return detail::ensure_grad(check()).data(); }

void Tensor::zero_grad() {
  TensorImpl& t = check();
  if (!t.grad.empty()) std::fill(t.grad.begin(), t.grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  const TensorImpl& src = check();
  Tensor t = make_tensor(src.shape, src.requires_grad);
  t.vec() = src.data;
  return t;
}

namespace {
thread_local Tape* t_active_tape = nullptr;
}

Tape::Tape() {
  prev_ = t_active_tape;
  t_active_tape = this;
}

Tape::~Tape() {
  t_active_tape = prev_;
}

Tape* Tape::active() { return t_active_tape; }

void Tape::record(const std::shared_ptr<TensorImpl>& out, std::function<void()> backward_fn) {
  nodes_.push_back({out, std::move(backward_fn)});
  outputs_.insert(out.get());
}

void Tape::clear() {
  nodes_.clear();
  outputs_.clear();
}

bool tracing() { return t_active_tape != nullptr; }

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (tape == nullptr) {
    throw UsageError("backward() called with no active tape");
  }
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward() expects a defined one-element loss tensor");
  }
  if (!tape->owns(loss.impl().get())) {
    throw UsageError(
        "backward() loss is not an output of the active tape "
        "(was backward already called, or was the loss computed outside the tape?)");
  }
  detail::ensure_grad(*loss.impl())[0] = 1.0;
  for (auto it = tape->nodes_.rbegin(); it != tape->nodes_.rend(); ++it) {
    // Nodes whose output never received a gradient contribute nothing.
    if (it->out->grad.empty()) continue;
    it->backward_fn();
  }
  tape->clear();
}

namespace detail {

std::vector<double>& ensure_grad(TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
  return t.grad;
}

void check_finite(const TensorImpl& t, const char* op) {
  if (!finite_checks_enabled()) return;
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      throw InternalError(cat(op, " produced a non-finite value in tensor of shape ",
                              shape_str(t.shape)));
    }
  }
}

}  // namespace detail

}  // namespace bhsrs
