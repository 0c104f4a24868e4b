// Copyright 2026 The MSDNet Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace msdnet {

using Scalar = double;
using Index = Eigen::Index;
using Shape = std::vector<Index>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index numel(Shape const &shape);
std::string to_string(Shape const &shape);

/// Dense row-major tensor handle.
///
/// Copies share storage. Values are only mutated in place through
/// mutable_values(), which is reserved for optimizer updates of leaf
/// parameters; every other tensor is produced by an operator and is
/// immutable afterwards.
class Tensor
{
public:
  Tensor();
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, Vector values, bool requires_grad = false);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, Scalar value);
  static Tensor from(Shape shape, std::initializer_list<Scalar> values);
  static Tensor scalar(Scalar value);

  Shape const &shape() const;
  int          rank() const;
  Index        dim(int axis) const;
  Index        numel() const;
  bool         defined() const { return impl_ != nullptr; }

  Vector const &values() const;
  Vector       &mutable_values();
  Scalar        item() const;
  Scalar        at(std::initializer_list<Index> index) const;

  Eigen::Map<RowMatrix const> matrix(Index rows, Index cols) const;

  bool    requires_grad() const;
  Tensor &set_requires_grad(bool value);

  /// Unique identity of the underlying storage; stable across copies.
  std::uint64_t id() const;

  /// Fresh tensor with the same values, outside of any tape.
  Tensor detach() const;

  bool same_storage(Tensor const &other) const { return impl_ == other.impl_; }

private:
  struct Impl
  {
    Shape         shape;
    Vector        values;
    bool          requires_grad = false;
    std::uint64_t id = 0;
  };
  std::shared_ptr<Impl> impl_;
};

/// Accumulates gradients during a backward sweep.
class GradientSink
{
public:
  /// Zero-initialized accumulator for `t`, or nullptr when `t` takes no gradient.
  Vector *slot(Tensor const &t);
  void    add(Tensor const &t, Vector const &grad);

private:
  friend class Tape;
  std::unordered_map<std::uint64_t, Vector> grads_;
};

/// Leaf gradients returned by Tape::backward.
class Gradients
{
public:
  Gradients() = default;
  explicit Gradients(std::unordered_map<std::uint64_t, Vector> grads);

  /// Gradient of `leaf`; zeros of the leaf's shape when it was not reached.
  Tensor of(Tensor const &leaf) const;
  bool   contains(Tensor const &leaf) const;
  std::size_t size() const { return grads_.size(); }

private:
  std::unordered_map<std::uint64_t, Vector> grads_;
};

/// Ordered record of differentiable operations.
///
/// Operators record onto the tape installed for the current thread by a
/// TapeScope. Without an active tape, or when no input requires a gradient,
/// nothing is recorded and the output is a constant.
class Tape
{
public:
  using BackwardFn = std::function<void(Vector const &grad_out, GradientSink &sink)>;

  struct Node
  {
    std::string_view           op;
    std::vector<std::uint64_t> inputs;
    std::uint64_t              output;
    BackwardFn                 backward;
  };

  Tape() = default;
  Tape(Tape const &) = delete;
  Tape &operator=(Tape const &) = delete;

  void record(std::string_view op, std::vector<Tensor> const &inputs, Tensor const &output, BackwardFn fn);

  /// Reverse sweep from a scalar loss. Each node is visited once; gradients
  /// reaching a tensor along several paths are summed.
  Gradients backward(Tensor const &loss) const;

  std::size_t       size() const { return nodes_.size(); }
  Node const       &node(std::size_t i) const { return nodes_[i]; }
  static Tape      *active();

private:
  friend class TapeScope;
  std::vector<Node> nodes_;
};

/// Installs a tape as the active recorder for this thread.
class TapeScope
{
public:
  explicit TapeScope(Tape &tape);
  ~TapeScope();
  TapeScope(TapeScope const &) = delete;
  TapeScope &operator=(TapeScope const &) = delete;

private:
  Tape *previous_;
};

/// Suspends recording for this thread.
class NoGradScope
{
public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(NoGradScope const &) = delete;
  NoGradScope &operator=(NoGradScope const &) = delete;

private:
  Tape *previous_;
};

namespace detail {

/// True when an op over `inputs` must be recorded.
bool tracking(std::initializer_list<Tensor const *> inputs);
bool tracking(std::vector<Tensor> const &inputs);

} // namespace detail

} // namespace msdnet
