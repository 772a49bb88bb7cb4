// Copyright (C) 2026 The mmt5-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "mmt/tensor.hpp"

#include <numeric>
#include <sstream>

#include "mmt/error.hpp"

namespace mmt {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(mmt::numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (mmt::numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " needs " +
                         std::to_string(mmt::numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from(Shape{}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
  const Shape& s = impl_->shape;
  if (s.empty()) return 1;
  return numel() / s.back();
}

std::size_t Tensor::cols() const {
  const Shape& s = impl_->shape;
  return s.empty() ? 1 : s.back();
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

void Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  if (!on) impl_->grad.clear();
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->requires_grad = impl_->requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::reshape(Shape shape) const {
  if (mmt::numel(shape) != numel()) {
    throw DimensionError("cannot reshape " + shape_str(impl_->shape) + " to " + shape_str(shape));
  }
  // Reshape aliases the value buffer only through a fresh node so the two
  // views keep independent gradient slots; gradients flow back via the tape.
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = impl_->data;
  impl->requires_grad = impl_->requires_grad;
  Tensor out(impl);
  if (impl_->requires_grad) {
    if (Tape* tape = Tape::active()) {
      auto src = impl_;
      impl->tape_id = tape->record(impl, [src, impl] {
        auto& g = src->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += impl->grad[i];
      });
    }
  }
  return out;
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::~Tape() { clear(); }

Tape* Tape::active() { return g_active_tape; }

std::size_t Tape::record(std::shared_ptr<TensorImpl> out, BackwardFn fn) {
  const std::size_t id = nodes_.size();
  out->tape_id = id;
  nodes_.push_back(Node{std::move(out), std::move(fn)});
  return id;
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  const auto id = loss.tape_id();
  if (!id || *id >= nodes_.size() || nodes_[*id].out != loss.impl()) {
    throw ContractError("backward() loss is not on this tape");
  }
  loss.impl()->ensure_grad()[0] += 1.0;
  for (std::size_t i = *id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.out->grad.empty()) continue;
    node.backward();
  }
}

void Tape::clear() {
  for (Node& node : nodes_) node.out->tape_id.reset();
  nodes_.clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (tape == nullptr) throw ContractError("backward() without an active tape");
  tape->backward(loss);
}

}  // namespace mmt
