// Copyright 2026 The fourfield Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major tensors of doubles with reverse-mode differentiation.
//
// Every operation records a backward rule written in terms of other tensor
// operations. With `create_graph` set, `backward` therefore records the
// gradient computation itself, which is what the R1 penalty needs to get a
// weight-gradient of an input-gradient norm.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fourfield/error.hpp"

namespace fourfield {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {
struct Node;
using BackwardFn =
    std::function<std::vector<Tensor>(const Tensor& grad, std::span<const Tensor> parents)>;
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  /// Graph leaf. Throws ShapeError when the value count does not match the
  /// shape and NonFiniteError on NaN/Inf input.
  static Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor constant(Shape shape, std::vector<double> values) {
    return leaf(std::move(shape), std::move(values), false);
  }
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t numel() const;
  std::span<const double> values() const;
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  bool is_leaf() const;
  const char* op_name() const;
  const std::vector<Tensor>& parents() const;

  /// Plain copy of the values without graph history.
  Tensor detach() const;

  /// Writable storage of a leaf; used by optimizers and finite differences.
  /// Throws if the tensor is not a leaf.
  std::span<double> leaf_values();

  /// Identity used to key gradients.
  const detail::Node* id() const { return node_.get(); }

  static Tensor make_result(Shape shape, std::vector<double> values, const char* op,
                            std::vector<Tensor> parents, detail::BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<Tensor> parents;
  BackwardFn backward;
};
}  // namespace detail

/// Thread-local switch for graph recording.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class GradModeGuard {
 public:
  explicit GradModeGuard(bool on) : prev_(GradMode::enabled()) { GradMode::set_enabled(on); }
  ~GradModeGuard() { GradMode::set_enabled(prev_); }
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool prev_;
};

// Elementwise, with right-aligned broadcasting for binary ops.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor pow(const Tensor& a, double p);
Tensor square(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }
inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }

Shape broadcast_shapes(const Shape& a, const Shape& b);

/// [..., M, K] x [..., K, N] -> [..., M, N]; leading extents broadcast.
Tensor matmul(const Tensor& a, const Tensor& b);
/// Swaps the last two axes.
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a, std::vector<std::size_t> axes, bool keepdims = false);
Tensor mean(const Tensor& a, std::vector<std::size_t> axes, bool keepdims = false);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor broadcast_to(const Tensor& a, const Shape& shape);
/// Sums a broadcast result back down to `shape`.
Tensor sum_to(const Tensor& a, const Shape& shape);

struct Range {
  std::size_t begin;
  std::size_t end;
};

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// One range per leading axis; trailing axes without a range are kept whole.
Tensor slice(const Tensor& a, const std::vector<Range>& ranges);
Tensor slice_axis(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
/// Embeds `a` into a zero tensor of `shape` at `ranges` (adjoint of slice).
Tensor pad_into(const Tensor& a, const Shape& shape, const std::vector<Range>& ranges);

using IndexMap = std::shared_ptr<const std::vector<std::int64_t>>;

/// out[i] = a[index[i]], or 0 where index[i] < 0.
Tensor gather(const Tensor& a, IndexMap index, Shape out_shape);
/// Adjoint of gather: out = zeros(out_shape); out[index[i]] += a[i].
Tensor scatter_add(const Tensor& a, IndexMap index, Shape out_shape);

/// out[..., j] = sum_{k<j} a[..., k] along the last axis.
Tensor cumsum_exclusive(const Tensor& a);
/// out[..., j] = sum_{k>j} a[..., k] along the last axis.
Tensor rcumsum_exclusive(const Tensor& a);

class GradientMap {
 public:
  const Tensor& at(const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const { return grads_.count(leaf.id()) != 0; }
  std::size_t size() const { return grads_.size(); }
  void insert(const Tensor& leaf, Tensor grad);

 private:
  std::unordered_map<const detail::Node*, Tensor> grads_;
};

/// Reverse-mode gradients of a one-element `loss` with respect to `leaves`.
/// Leaves that the loss does not reach get zeros. With `create_graph` the
/// returned gradients are themselves differentiable.
GradientMap backward(const Tensor& loss, std::span<const Tensor> leaves,
                     bool create_graph = false);
GradientMap backward(const Tensor& loss, std::initializer_list<Tensor> leaves,
                     bool create_graph = false);

// Records the activation pattern of non-smooth ops while active, so that a
// finite-difference probe can tell when it stepped across a kink.
class KinkRecorder {
 public:
  void note(std::span<const double> inputs);
  void note_flag(bool near_kink);
  std::uint64_t signature() const { return hash_; }
  bool flagged() const { return flagged_; }

  static KinkRecorder* active();
  static void set_active(KinkRecorder* recorder);

 private:
  std::uint64_t hash_ = 1469598103934665603ull;
  bool flagged_ = false;
};

}  // namespace fourfield
