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

#include "fourfield/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace fourfield {

namespace {

thread_local bool grad_enabled = true;
thread_local KinkRecorder* kink_recorder = nullptr;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string("non-finite value produced by ") + op);
    }
  }
}

std::vector<std::size_t> contiguous_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

// Strides of `shape` viewed (right-aligned) inside `out`; broadcast axes get 0.
std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
  const auto own = contiguous_strides(shape);
  std::vector<std::size_t> strides(out.size(), 0);
  const std::size_t offset = out.size() - shape.size();
  for (std::size_t i = 0; i < shape.size(); ++i) {
    strides[offset + i] = shape[i] == 1 ? 0 : own[i];
  }
  return strides;
}

// Calls f(out_index, a_index, b_index) over every element of `out`.
template <class F>
void broadcast_loop(const Shape& out, const std::vector<std::size_t>& sa,
                    const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t r = out.size();
  const std::size_t n = shape_numel(out);
  if (n == 0) return;
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  const std::size_t inner = out[r - 1];
  const std::size_t step_a = sa[r - 1];
  const std::size_t step_b = sb[r - 1];
  const std::size_t outer = n / inner;
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0, ob = 0, o = 0;
  for (std::size_t k = 0; k < outer; ++k) {
    std::size_t pa = oa, pb = ob;
    for (std::size_t j = 0; j < inner; ++j) {
      f(o++, pa, pb);
      pa += step_a;
      pb += step_b;
    }
    for (std::size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < out[d]) break;
      oa -= sa[d] * out[d];
      ob -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

bool any_requires_grad(const std::vector<Tensor>& parents) {
  return std::any_of(parents.begin(), parents.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

template <class F>
Tensor unary(const Tensor& a, const char* op, F&& f, detail::BackwardFn backward) {
  const auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return Tensor::make_result(a.shape(), std::move(out), op, {a}, std::move(backward));
}

template <class F>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, F&& f,
              detail::BackwardFn backward) {
  const auto va = a.values();
  const auto vb = b.values();
  Shape out_shape;
  std::vector<double> out;
  if (a.shape() == b.shape()) {
    out_shape = a.shape();
    out.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) out[i] = f(va[i], vb[i]);
  } else {
    out_shape = broadcast_shapes(a.shape(), b.shape());
    out.resize(shape_numel(out_shape));
    broadcast_loop(out_shape, broadcast_strides(a.shape(), out_shape),
                   broadcast_strides(b.shape(), out_shape),
                   [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = f(va[i], vb[j]); });
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), op, {a, b},
                             std::move(backward));
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

bool GradMode::enabled() { return grad_enabled; }
void GradMode::set_enabled(bool on) { grad_enabled = on; }

KinkRecorder* KinkRecorder::active() { return kink_recorder; }
void KinkRecorder::set_active(KinkRecorder* recorder) { kink_recorder = recorder; }

void KinkRecorder::note(std::span<const double> inputs) {
  for (double v : inputs) {
    const std::uint64_t code = v > 0 ? 1 : (v < 0 ? 2 : 3);
    hash_ = (hash_ ^ code) * 1099511628211ull;
  }
}

void KinkRecorder::note_flag(bool near_kink) { flagged_ = flagged_ || near_kink; }

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("leaf: shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError("leaf: non-finite input value");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) {
  const auto n = shape_numel(shape);
  return leaf(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return leaf(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return leaf({}, {value}); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->values.size(); }
std::span<const double> Tensor::values() const { return node_->values; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor has " + std::to_string(numel()) + " values");
  return node_->values[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw ShapeError("at: index rank mismatch");
  const auto strides = contiguous_strides(shape());
  std::size_t flat = 0, d = 0;
  for (auto i : index) {
    if (i >= shape()[d]) throw ShapeError("at: index out of range");
    flat += i * strides[d++];
  }
  return node_->values[flat];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_->is_leaf; }
const char* Tensor::op_name() const { return node_->op; }
const std::vector<Tensor>& Tensor::parents() const { return node_->parents; }

Tensor Tensor::detach() const { return leaf(shape(), node_->values, false); }

std::span<double> Tensor::leaf_values() {
  if (!node_->is_leaf) throw Error("leaf_values: tensor is produced by an operation");
  return node_->values;
}

Tensor Tensor::make_result(Shape shape, std::vector<double> values, const char* op,
                           std::vector<Tensor> parents, detail::BackwardFn backward) {
  check_finite(values, op);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->op = op;
  node->is_leaf = false;
  if (GradMode::enabled() && any_requires_grad(parents)) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t ea = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t eb = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = std::max(ea, eb);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; },
                [](const Tensor& g, std::span<const Tensor> p) {
                  return std::vector<Tensor>{sum_to(g, p[0].shape()), sum_to(g, p[1].shape())};
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(a, b, "sub", [](double x, double y) { return x - y; },
                [](const Tensor& g, std::span<const Tensor> p) {
                  return std::vector<Tensor>{sum_to(g, p[0].shape()),
                                             sum_to(neg(g), p[1].shape())};
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, "mul", [](double x, double y) { return x * y; },
                [](const Tensor& g, std::span<const Tensor> p) {
                  return std::vector<Tensor>{sum_to(mul(g, p[1]), p[0].shape()),
                                             sum_to(mul(g, p[0]), p[1].shape())};
                });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(a, b, "div", [](double x, double y) { return x / y; },
                [](const Tensor& g, std::span<const Tensor> p) {
                  const Tensor ga = div(g, p[1]);
                  const Tensor gb = neg(div(mul(ga, p[0]), p[1]));
                  return std::vector<Tensor>{sum_to(ga, p[0].shape()), sum_to(gb, p[1].shape())};
                });
}

Tensor neg(const Tensor& a) {
  return unary(a, "neg", [](double x) { return -x; },
               [](const Tensor& g, std::span<const Tensor>) { return std::vector<Tensor>{neg(g)}; });
}

Tensor scale(const Tensor& a, double c) {
  return unary(a, "scale", [c](double x) { return c * x; },
               [c](const Tensor& g, std::span<const Tensor>) {
                 return std::vector<Tensor>{scale(g, c)};
               });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary(a, "add_scalar", [c](double x) { return x + c; },
               [](const Tensor& g, std::span<const Tensor>) { return std::vector<Tensor>{g}; });
}

Tensor exp(const Tensor& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); },
               [](const Tensor& g, std::span<const Tensor> p) {
                 return std::vector<Tensor>{mul(g, exp(p[0]))};
               });
}

Tensor log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0)) throw DomainError("log of non-positive value");
  }
  return unary(a, "log", [](double x) { return std::log(x); },
               [](const Tensor& g, std::span<const Tensor> p) {
                 return std::vector<Tensor>{div(g, p[0])};
               });
}

Tensor sin(const Tensor& a) {
  return unary(a, "sin", [](double x) { return std::sin(x); },
               [](const Tensor& g, std::span<const Tensor> p) {
                 return std::vector<Tensor>{mul(g, cos(p[0]))};
               });
}

Tensor cos(const Tensor& a) {
  return unary(a, "cos", [](double x) { return std::cos(x); },
               [](const Tensor& g, std::span<const Tensor> p) {
                 return std::vector<Tensor>{neg(mul(g, sin(p[0])))};
               });
}

Tensor softplus(const Tensor& a) {
  return unary(a, "softplus", stable_softplus, [](const Tensor& g, std::span<const Tensor> p) {
    return std::vector<Tensor>{mul(g, sigmoid(p[0]))};
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid", stable_sigmoid, [](const Tensor& g, std::span<const Tensor> p) {
    const Tensor s = sigmoid(p[0]);
    return std::vector<Tensor>{mul(g, mul(s, add_scalar(neg(s), 1.0)))};
  });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  if (auto* rec = KinkRecorder::active()) rec->note(a.values());
  return unary(a, "leaky_relu", [slope](double x) { return x > 0 ? x : slope * x; },
               [slope](const Tensor& g, std::span<const Tensor> p) {
                 const auto in = p[0].values();
                 std::vector<double> mask(in.size());
                 for (std::size_t i = 0; i < in.size(); ++i) mask[i] = in[i] > 0 ? 1.0 : slope;
                 return std::vector<Tensor>{mul(g, Tensor::constant(p[0].shape(), std::move(mask)))};
               });
}

Tensor pow(const Tensor& a, double e) {
  return unary(a, "pow", [e](double x) { return std::pow(x, e); },
               [e](const Tensor& g, std::span<const Tensor> p) {
                 return std::vector<Tensor>{mul(g, scale(pow(p[0], e - 1.0), e))};
               });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; },
               [](const Tensor& g, std::span<const Tensor> p) {
                 return std::vector<Tensor>{mul(g, scale(p[0], 2.0))};
               });
}

// ---------------------------------------------------------------------------
// Linear algebra and shape ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) throw ShapeError("matmul: operands need rank >= 2");
  const std::size_t m = a.shape()[a.rank() - 2];
  const std::size_t k = a.shape()[a.rank() - 1];
  const std::size_t kb = b.shape()[b.rank() - 2];
  const std::size_t n = b.shape()[b.rank() - 1];
  if (k != kb) {
    throw ShapeError("matmul: inner extents differ " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  const Shape batch = broadcast_shapes(batch_a, batch_b);
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<double> out(shape_numel(out_shape));

  auto sa = broadcast_strides(batch_a, batch);
  auto sb = broadcast_strides(batch_b, batch);
  const auto va = a.values();
  const auto vb = b.values();
  auto run = [&](std::size_t o, std::size_t ia, std::size_t ib) {
    Eigen::Map<const RowMat> ma(va.data() + ia * m * k, m, k);
    Eigen::Map<const RowMat> mb(vb.data() + ib * k * n, k, n);
    Eigen::Map<RowMat> mc(out.data() + o * m * n, m, n);
    mc.noalias() = ma * mb;
  };
  if (batch.empty()) {
    run(0, 0, 0);
  } else {
    broadcast_loop(batch, sa, sb, run);
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), "matmul", {a, b},
                             [](const Tensor& g, std::span<const Tensor> p) {
                               return std::vector<Tensor>{
                                   sum_to(matmul(g, transpose(p[1])), p[0].shape()),
                                   sum_to(matmul(transpose(p[0]), g), p[1].shape())};
                             });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() < 2) throw ShapeError("transpose: rank < 2");
  Shape shape = a.shape();
  const std::size_t r = shape.size();
  const std::size_t m = shape[r - 2], n = shape[r - 1];
  std::swap(shape[r - 2], shape[r - 1]);
  const std::size_t batches = a.numel() / (m * n);
  const auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t bi = 0; bi < batches; ++bi) {
    const double* src = in.data() + bi * m * n;
    double* dst = out.data() + bi * m * n;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  }
  return Tensor::make_result(std::move(shape), std::move(out), "transpose", {a},
                             [](const Tensor& g, std::span<const Tensor>) {
                               return std::vector<Tensor>{transpose(g)};
                             });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  const auto in = a.values();
  return Tensor::make_result(std::move(shape), std::vector<double>(in.begin(), in.end()),
                             "reshape", {a}, [](const Tensor& g, std::span<const Tensor> p) {
                               return std::vector<Tensor>{reshape(g, p[0].shape())};
                             });
}

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  if (broadcast_shapes(a.shape(), shape) != shape) {
    throw ShapeError("broadcast_to: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  const auto in = a.values();
  std::vector<double> out(shape_numel(shape));
  const auto sa = broadcast_strides(a.shape(), shape);
  broadcast_loop(shape, sa, sa, [&](std::size_t o, std::size_t i, std::size_t) { out[o] = in[i]; });
  return Tensor::make_result(shape, std::move(out), "broadcast_to", {a},
                             [](const Tensor& g, std::span<const Tensor> p) {
                               return std::vector<Tensor>{sum_to(g, p[0].shape())};
                             });
}

Tensor sum_to(const Tensor& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  if (broadcast_shapes(shape, a.shape()) != a.shape()) {
    throw ShapeError("sum_to: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  const auto in = a.values();
  std::vector<double> out(shape_numel(shape), 0.0);
  const auto st = broadcast_strides(shape, a.shape());
  broadcast_loop(a.shape(), st, st,
                 [&](std::size_t o, std::size_t i, std::size_t) { out[i] += in[o]; });
  return Tensor::make_result(shape, std::move(out), "sum_to", {a},
                             [](const Tensor& g, std::span<const Tensor> p) {
                               return std::vector<Tensor>{broadcast_to(g, p[0].shape())};
                             });
}

Tensor sum(const Tensor& a, std::vector<std::size_t> axes, bool keepdims) {
  Shape kept = a.shape();
  for (auto ax : axes) {
    if (ax >= a.rank()) throw ShapeError("sum: axis out of range");
    kept[ax] = 1;
  }
  Tensor reduced = sum_to(a, kept);
  if (keepdims) return reduced;
  Shape squeezed;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (std::find(axes.begin(), axes.end(), i) == axes.end()) squeezed.push_back(kept[i]);
  }
  return reshape(reduced, std::move(squeezed));
}

Tensor mean(const Tensor& a, std::vector<std::size_t> axes, bool keepdims) {
  std::size_t count = 1;
  for (auto ax : axes) {
    if (ax >= a.rank()) throw ShapeError("mean: axis out of range");
    count *= a.shape()[ax];
  }
  return scale(sum(a, std::move(axes), keepdims), 1.0 / static_cast<double>(count));
}

Tensor sum_all(const Tensor& a) {
  std::vector<std::size_t> axes(a.rank());
  std::iota(axes.begin(), axes.end(), 0);
  return sum(a, axes, false);
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

namespace {

// Copies the block `ranges` of `src` (shape `full`) to/from a dense buffer.
template <class F>
void for_each_in_block(const Shape& full, const std::vector<Range>& ranges, F&& f) {
  const auto strides = contiguous_strides(full);
  Shape block(full.size());
  for (std::size_t d = 0; d < full.size(); ++d) block[d] = ranges[d].end - ranges[d].begin;
  std::size_t base = 0;
  for (std::size_t d = 0; d < full.size(); ++d) base += ranges[d].begin * strides[d];
  std::vector<std::size_t> s(strides.begin(), strides.end());
  broadcast_loop(block, s, s, [&](std::size_t o, std::size_t i, std::size_t) { f(o, base + i); });
}

std::vector<Range> complete_ranges(const Shape& shape, const std::vector<Range>& ranges) {
  if (ranges.size() > shape.size()) throw ShapeError("slice: more ranges than axes");
  std::vector<Range> full(shape.size());
  for (std::size_t d = 0; d < shape.size(); ++d) {
    full[d] = d < ranges.size() ? ranges[d] : Range{0, shape[d]};
    if (full[d].begin >= full[d].end || full[d].end > shape[d]) {
      throw ShapeError("slice: range [" + std::to_string(full[d].begin) + "," +
                       std::to_string(full[d].end) + ") invalid for axis " + std::to_string(d) +
                       " of " + shape_str(shape));
    }
  }
  return full;
}

}  // namespace

Tensor slice(const Tensor& a, const std::vector<Range>& ranges) {
  const auto full = complete_ranges(a.shape(), ranges);
  Shape out_shape(full.size());
  for (std::size_t d = 0; d < full.size(); ++d) out_shape[d] = full[d].end - full[d].begin;
  std::vector<double> out(shape_numel(out_shape));
  const auto in = a.values();
  for_each_in_block(a.shape(), full, [&](std::size_t o, std::size_t i) { out[o] = in[i]; });
  return Tensor::make_result(std::move(out_shape), std::move(out), "slice", {a},
                             [full](const Tensor& g, std::span<const Tensor> p) {
                               return std::vector<Tensor>{pad_into(g, p[0].shape(), full)};
                             });
}

Tensor slice_axis(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= a.rank()) throw ShapeError("slice_axis: axis out of range");
  std::vector<Range> ranges(axis + 1);
  for (std::size_t d = 0; d < axis; ++d) ranges[d] = {0, a.shape()[d]};
  ranges[axis] = {begin, end};
  return slice(a, ranges);
}

Tensor pad_into(const Tensor& a, const Shape& shape, const std::vector<Range>& ranges) {
  const auto full = complete_ranges(shape, ranges);
  for (std::size_t d = 0; d < full.size(); ++d) {
    if (full[d].end - full[d].begin != a.shape().at(d)) throw ShapeError("pad_into: block mismatch");
  }
  if (a.rank() != shape.size()) throw ShapeError("pad_into: rank mismatch");
  std::vector<double> out(shape_numel(shape), 0.0);
  const auto in = a.values();
  for_each_in_block(shape, full, [&](std::size_t o, std::size_t i) { out[i] = in[o]; });
  return Tensor::make_result(shape, std::move(out), "pad_into", {a},
                             [full](const Tensor& g, std::span<const Tensor>) {
                               return std::vector<Tensor>{slice(g, full)};
                             });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.shape()[d] != first[d]) {
        throw ShapeError("concat: " + shape_str(p.shape()) + " vs " + shape_str(first));
      }
    }
    out_shape[axis] += p.shape()[axis];
  }
  std::size_t outer = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  std::size_t inner = 1;
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];
  std::vector<double> out(shape_numel(out_shape));
  const std::size_t row = out_shape[axis] * inner;
  std::size_t offset = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    const std::size_t chunk = p.shape()[axis] * inner;
    const auto in = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(in.data() + o * chunk, chunk, out.data() + o * row + offset);
    }
    offset += chunk;
    extents.push_back(p.shape()[axis]);
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), "concat", parts,
                             [axis, extents](const Tensor& g, std::span<const Tensor>) {
                               std::vector<Tensor> grads;
                               std::size_t begin = 0;
                               for (auto e : extents) {
                                 grads.push_back(slice_axis(g, axis, begin, begin + e));
                                 begin += e;
                               }
                               return grads;
                             });
}

Tensor gather(const Tensor& a, IndexMap index, Shape out_shape) {
  if (index->size() != shape_numel(out_shape)) throw ShapeError("gather: index/shape mismatch");
  const auto in = a.values();
  const auto& idx = *index;
  std::vector<double> out(idx.size(), 0.0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= 0) {
      if (static_cast<std::size_t>(idx[i]) >= in.size()) throw ShapeError("gather: index out of range");
      out[i] = in[static_cast<std::size_t>(idx[i])];
    }
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), "gather", {a},
                             [index](const Tensor& g, std::span<const Tensor> p) {
                               return std::vector<Tensor>{scatter_add(g, index, p[0].shape())};
                             });
}

Tensor scatter_add(const Tensor& a, IndexMap index, Shape out_shape) {
  if (index->size() != a.numel()) throw ShapeError("scatter_add: index/shape mismatch");
  const auto in = a.values();
  const auto& idx = *index;
  std::vector<double> out(shape_numel(out_shape), 0.0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= 0) {
      if (static_cast<std::size_t>(idx[i]) >= out.size()) throw ShapeError("scatter_add: index out of range");
      out[static_cast<std::size_t>(idx[i])] += in[i];
    }
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), "scatter_add", {a},
                             [index](const Tensor& g, std::span<const Tensor> p) {
                               return std::vector<Tensor>{gather(g, index, p[0].shape())};
                             });
}

namespace {

Tensor scan_last(const Tensor& a, bool reverse) {
  if (a.rank() == 0) throw ShapeError("cumsum: scalar input");
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.numel() / n;
  const auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = in.data() + r * n;
    double* dst = out.data() + r * n;
    double acc = 0.0;
    if (!reverse) {
      for (std::size_t j = 0; j < n; ++j) {
        dst[j] = acc;
        acc += src[j];
      }
    } else {
      for (std::size_t j = n; j-- > 0;) {
        dst[j] = acc;
        acc += src[j];
      }
    }
  }
  return Tensor::make_result(a.shape(), std::move(out), reverse ? "rcumsum" : "cumsum", {a},
                             [reverse](const Tensor& g, std::span<const Tensor>) {
                               return std::vector<Tensor>{reverse ? cumsum_exclusive(g)
                                                                  : rcumsum_exclusive(g)};
                             });
}

}  // namespace

Tensor cumsum_exclusive(const Tensor& a) { return scan_last(a, false); }
Tensor rcumsum_exclusive(const Tensor& a) { return scan_last(a, true); }

// ---------------------------------------------------------------------------
// Reverse sweep

const Tensor& GradientMap::at(const Tensor& leaf) const {
  auto it = grads_.find(leaf.id());
  if (it == grads_.end()) throw Error("GradientMap: tensor was not requested");
  return it->second;
}

void GradientMap::insert(const Tensor& leaf, Tensor grad) { grads_[leaf.id()] = std::move(grad); }

GradientMap backward(const Tensor& loss, std::span<const Tensor> leaves, bool create_graph) {
  if (loss.numel() != 1) {
    throw ShapeError("backward: loss must hold exactly one value, got " + shape_str(loss.shape()));
  }
  // Post-order DFS over the recorded graph.
  std::vector<Tensor> order;
  std::unordered_set<const detail::Node*> visited;
  if (loss.requires_grad()) {
    std::vector<std::pair<Tensor, std::size_t>> stack{{loss, 0}};
    visited.insert(loss.id());
    while (!stack.empty()) {
      auto& [t, next] = stack.back();
      const auto& ps = t.parents();
      if (next < ps.size()) {
        const Tensor p = ps[next++];
        if (p.requires_grad() && visited.insert(p.id()).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(t);
        stack.pop_back();
      }
    }
  }

  std::unordered_set<const detail::Node*> requested;
  for (const auto& leaf : leaves) requested.insert(leaf.id());

  GradModeGuard mode(create_graph);
  std::unordered_map<const detail::Node*, Tensor> grads;
  if (loss.requires_grad()) grads.emplace(loss.id(), Tensor::full(loss.shape(), 1.0));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Tensor& t = *it;
    if (t.is_leaf()) continue;
    auto found = grads.find(t.id());
    if (found == grads.end()) continue;
    const Tensor g = found->second;
    const auto& ps = t.parents();
    // Intermediate gradients are no longer needed once propagated.
    if (!create_graph && requested.count(t.id()) == 0) grads.erase(found);
    auto parent_grads = t.id()->backward(g, ps);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (!ps[i].requires_grad()) continue;
      auto slot = grads.find(ps[i].id());
      if (slot == grads.end()) {
        grads.emplace(ps[i].id(), std::move(parent_grads[i]));
      } else {
        slot->second = add(slot->second, parent_grads[i]);
      }
    }
  }

  GradientMap result;
  for (const auto& leaf : leaves) {
    auto it = grads.find(leaf.id());
    if (it == grads.end()) {
      result.insert(leaf, Tensor::zeros(leaf.shape()));
    } else {
      result.insert(leaf, create_graph ? it->second : it->second.detach());
    }
  }
  return result;
}

GradientMap backward(const Tensor& loss, std::initializer_list<Tensor> leaves, bool create_graph) {
  std::vector<Tensor> v(leaves);
  return backward(loss, std::span<const Tensor>(v), create_graph);
}

}  // namespace fourfield
