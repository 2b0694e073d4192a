#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "stg/types.hpp"

namespace stg {

// Value-semantic handle to a rank-2 tensor.  Copies share storage, so the
// tensors captured by backward closures see gradient updates made through any
// other handle.  The gradient buffer is allocated on first accumulation;
// has_grad() distinguishes "no gradient flowed here" from "zero gradient".
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Mat value, bool requires_grad = false)
      : impl_(std::make_shared<Impl>(std::move(value), requires_grad)) {}

  static Tensor zeros(Index rows, Index cols, bool requires_grad = false) {
    return Tensor(Mat::Zero(rows, cols), requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  Index rows() const { return impl_->value.rows(); }
  Index cols() const { return impl_->value.cols(); }
  Index size() const { return impl_->value.size(); }

  // Pointer-like const semantics: a const handle still reaches the shared
  // mutable storage, which lets backward closures (holding copies) write
  // gradients.
  Mat& value() const { return impl_->value; }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  bool has_grad() const { return impl_ && impl_->grad_live; }

  // Gradient buffer, zero-allocated on first use.
  Mat& grad() const {
    if (!impl_->grad_live) {
      impl_->grad = Mat::Zero(impl_->value.rows(), impl_->value.cols());
      impl_->grad_live = true;
    }
    return impl_->grad;
  }

  template <typename Expr>
  void accumulate_grad(const Expr& e) const {
    grad() += e;
  }

  // Drops the accumulated gradient; the next accumulation starts from zero.
  void clear_grad() const {
    if (impl_) {
      impl_->grad_live = false;
      impl_->grad.resize(0, 0);
    }
  }

 private:
  struct Impl {
    Impl(Mat v, bool rg) : value(std::move(v)), requires_grad(rg) {}
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool grad_live = false;
  };
  std::shared_ptr<Impl> impl_;
};

// Records one backward closure per primitive application, in forward order.
// backward() seeds the scalar loss and replays the closures exactly once in
// reverse, so gradients flow through the recorded program's transpose.
// Gradients accumulate additively across backward() calls until the caller
// clears them.  A disabled tape records nothing (inference mode).
class Tape {
 public:
  explicit Tape(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }

  void record(std::function<void()> step) {
    if (enabled_) steps_.push_back(std::move(step));
  }

  void backward(const Tensor& loss, Scalar seed = 1.0) {
    if (!enabled_) throw std::logic_error("backward on a disabled tape");
    if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1) {
      throw std::invalid_argument("backward requires a scalar (1x1) loss tensor");
    }
    loss.grad()(0, 0) += seed;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

  void clear() { steps_.clear(); }
  std::size_t size() const { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
  bool enabled_;
};

}  // namespace stg
