// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mmt {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::optional<std::size_t> tape_id;

  /// Allocates a zero gradient buffer if none exists yet.
  std::vector<double>& ensure_grad();
};

/// Dense row-major array of doubles with optional gradient. Copies share
/// storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t dim() const { return impl_->shape.size(); }
  std::size_t size(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }
  /// Leading extent for 2-D use; 1 for scalars.
  std::size_t rows() const;
  /// Trailing extent; 1 for scalars.
  std::size_t cols() const;

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;
  double at(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on);
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() { return impl_->ensure_grad(); }
  void zero_grad() { impl_->grad.clear(); }
  std::optional<std::size_t> tape_id() const { return impl_->tape_id; }

  Tensor clone() const;
  /// Same storage reinterpreted with a different shape of equal size.
  Tensor reshape(Shape shape) const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Reverse-mode tape. Operations executed while a tape is active and that
/// touch a requires_grad input are appended in execution order, which is
/// a valid topological order of the computation.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  /// Records `out` as produced by `fn`. Returns the node handle.
  std::size_t record(std::shared_ptr<TensorImpl> out, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded rule once, in
  /// reverse order, skipping nodes that received no gradient.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear();

  /// Innermost tape activated on this thread, or nullptr.
  static Tape* active();

 private:
  friend class TapeScope;
  struct Node {
    std::shared_ptr<TensorImpl> out;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

/// Activates a tape for the current thread for the scope's lifetime.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  ~TapeScope();

 private:
  Tape* previous_;
};

/// Runs backward on the tape that recorded `loss`.
void backward(const Tensor& loss);

}  // namespace mmt
