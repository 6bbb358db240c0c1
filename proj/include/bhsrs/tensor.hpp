#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "bhsrs/common.hpp"
#include "bhsrs/rng.hpp"

namespace bhsrs {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  // Allocated lazily (zero-filled) the first time a gradient is written.
  std::vector<double> grad;
  bool requires_grad = false;
};

// Handle with shared ownership of its storage; copies alias the same buffer.
// clone() makes an independent deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, double mean = 0.0, double stddev = 1.0,
                      bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return check().shape; }
  int64_t numel() const { return static_cast<int64_t>(check().data.size()); }
  // Axis length; negative indices count from the end.
  int64_t dim(int axis) const;

  double* data() { return check().data.data(); }
  const double* data() const { return check().data.data(); }
  std::vector<double>& vec() { return check().data; }
  const std::vector<double>& vec() const { return check().data; }

  // Value of a one-element tensor.
  double item() const;

  bool requires_grad() const { return check().requires_grad; }
  Tensor& set_requires_grad(bool on);

  // Gradient buffer, allocated zero-filled on first access.
  double* grad_data();
  // Read-only gradient view; empty if no gradient was ever written.
  const std::vector<double>& grad() const { return check().grad; }
  void zero_grad();

  Tensor clone() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  TensorImpl& check() const;

  std::shared_ptr<TensorImpl> impl_;

  friend Tensor make_tensor(Shape shape, bool requires_grad);
};

// Fresh zero tensor; the factory the ops build outputs with.
Tensor make_tensor(Shape shape, bool requires_grad);

// Reverse-mode tape. Constructing one makes it the active tape for the
// current thread (tapes nest; the innermost wins). Ops record a backward
// closure per output while a tape is active and some input requires grad.
// backward(loss) replays the closures in reverse and clears the tape, so a
// second backward without a fresh forward is a UsageError.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(const std::shared_ptr<TensorImpl>& out, std::function<void()> backward_fn);
  bool owns(const TensorImpl* t) const { return outputs_.count(t) != 0; }
  size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    std::shared_ptr<TensorImpl> out;
    std::function<void()> backward_fn;
  };

  std::vector<Node> nodes_;
  std::unordered_set<const TensorImpl*> outputs_;
  Tape* prev_ = nullptr;

  friend void backward(const Tensor& loss);
};

// True when the current thread has an active tape (i.e. ops should record).
bool tracing();

// Seeds d(loss)/d(loss) = 1, accumulates gradients for everything reachable
// on the active tape, then clears it. loss must be a one-element tensor
// produced under the active tape.
void backward(const Tensor& loss);

namespace detail {
// Zero-fills and returns the grad buffer, allocating if needed.
std::vector<double>& ensure_grad(TensorImpl& t);
// Throws InternalError if any element is NaN/Inf (only when finite checks
// are enabled). op names the producer for the message.
void check_finite(const TensorImpl& t, const char* op);
}  // namespace detail

}  // namespace bhsrs
