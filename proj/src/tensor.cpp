// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "msdnet/tensor.hpp"

#include "msdnet/errors.hpp"

#include <atomic>
#include <numeric>
#include <sstream>

namespace msdnet {

namespace {

std::uint64_t next_id()
{
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

thread_local Tape *active_tape = nullptr;

} // namespace

Index numel(Shape const &shape)
{
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

std::string to_string(Shape const &shape)
{
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, bool requires_grad)
  : Tensor(shape, Vector::Zero(msdnet::numel(shape)), requires_grad)
{
}

Tensor::Tensor(Shape shape, Vector values, bool requires_grad)
  : impl_(std::make_shared<Impl>())
{
  for (Index e : shape) {
    if (e < 0) throw DimensionError("negative extent in shape " + msdnet::to_string(shape));
  }
  if (values.size() != msdnet::numel(shape)) {
    throw DimensionError("tensor of shape " + msdnet::to_string(shape) + " given " + std::to_string(values.size()) +
                         " values");
  }
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
  impl_->id = next_id();
}

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(Shape shape, Scalar value)
{
  Index const n = msdnet::numel(shape);
  return Tensor(std::move(shape), Vector::Constant(n, value));
}

Tensor Tensor::from(Shape shape, std::initializer_list<Scalar> values)
{
  Vector v(static_cast<Index>(values.size()));
  Index  i = 0;
  for (Scalar x : values) v[i++] = x;
  return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::scalar(Scalar value) { return Tensor(Shape{}, Vector::Constant(1, value)); }

Shape const &Tensor::shape() const { return impl_->shape; }
int          Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }

Index Tensor::dim(int axis) const
{
  int const r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) throw ArgumentError("axis out of range for shape " + msdnet::to_string(shape()));
  return impl_->shape[static_cast<std::size_t>(axis)];
}

Index         Tensor::numel() const { return impl_->values.size(); }
Vector const &Tensor::values() const { return impl_->values; }
Vector       &Tensor::mutable_values() { return impl_->values; }

Scalar Tensor::item() const
{
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + msdnet::to_string(shape()));
  return impl_->values[0];
}

Scalar Tensor::at(std::initializer_list<Index> index) const
{
  if (static_cast<int>(index.size()) != rank()) throw DimensionError("index rank mismatch");
  Index flat = 0;
  int   a = 0;
  for (Index i : index) {
    Index const e = impl_->shape[static_cast<std::size_t>(a++)];
    if (i < 0 || i >= e) throw ArgumentError("index out of range");
    flat = flat * e + i;
  }
  return impl_->values[flat];
}

Eigen::Map<RowMatrix const> Tensor::matrix(Index rows, Index cols) const
{
  if (rows * cols != numel()) throw DimensionError("matrix view does not cover tensor");
  return Eigen::Map<RowMatrix const>(impl_->values.data(), rows, cols);
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor &Tensor::set_requires_grad(bool value)
{
  impl_->requires_grad = value;
  return *this;
}

std::uint64_t Tensor::id() const { return impl_ ? impl_->id : 0; }

Tensor Tensor::detach() const { return Tensor(shape(), values(), false); }

Vector *GradientSink::slot(Tensor const &t)
{
  if (!t.requires_grad()) return nullptr;
  auto [it, inserted] = grads_.try_emplace(t.id());
  if (inserted) it->second = Vector::Zero(t.numel());
  return &it->second;
}

void GradientSink::add(Tensor const &t, Vector const &grad)
{
  if (Vector *s = slot(t)) *s += grad;
}

Gradients::Gradients(std::unordered_map<std::uint64_t, Vector> grads)
  : grads_(std::move(grads))
{
}

Tensor Gradients::of(Tensor const &leaf) const
{
  auto it = grads_.find(leaf.id());
  if (it == grads_.end()) return Tensor::zeros(leaf.shape());
  return Tensor(leaf.shape(), it->second);
}

bool Gradients::contains(Tensor const &leaf) const { return grads_.count(leaf.id()) != 0; }

void Tape::record(std::string_view op, std::vector<Tensor> const &inputs, Tensor const &output, BackwardFn fn)
{
  Node n;
  n.op = op;
  n.inputs.reserve(inputs.size());
  for (auto const &t : inputs) n.inputs.push_back(t.id());
  n.output = output.id();
  n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
}

Gradients Tape::backward(Tensor const &loss) const
{
  if (!loss.defined() || loss.numel() != 1) {
    throw ArgumentError("backward() needs a scalar loss");
  }
  if (!loss.requires_grad()) throw ArgumentError("backward() loss is not on the tape");

  GradientSink sink;
  sink.grads_.emplace(loss.id(), Vector::Ones(1));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto g = sink.grads_.find(it->output);
    if (g == sink.grads_.end()) continue;
    Vector grad_out = std::move(g->second);
    sink.grads_.erase(g);
    it->backward(grad_out, sink);
  }
  return Gradients(std::move(sink.grads_));
}

Tape *Tape::active() { return active_tape; }

TapeScope::TapeScope(Tape &tape)
  : previous_(active_tape)
{
  active_tape = &tape;
}

TapeScope::~TapeScope() { active_tape = previous_; }

NoGradScope::NoGradScope()
  : previous_(active_tape)
{
  active_tape = nullptr;
}

NoGradScope::~NoGradScope() { active_tape = previous_; }

namespace detail {

bool tracking(std::initializer_list<Tensor const *> inputs)
{
  if (!active_tape) return false;
  for (Tensor const *t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

bool tracking(std::vector<Tensor> const &inputs)
{
  if (!active_tape) return false;
  for (auto const &t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

} // namespace detail

} // namespace msdnet
