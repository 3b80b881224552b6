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

#include "fourfield/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace fourfield {

namespace {

struct Probe {
  double value;
  std::uint64_t signature;
  bool flagged;
};

Probe evaluate(const std::function<Tensor()>& f) {
  KinkRecorder recorder;
  KinkRecorder* previous = KinkRecorder::active();
  KinkRecorder::set_active(&recorder);
  NoGradGuard no_grad;
  double value = 0.0;
  try {
    const Tensor out = f();
    if (out.numel() != 1) throw ShapeError("grad_check: function must return a scalar");
    value = out.item();
  } catch (...) {
    KinkRecorder::set_active(previous);
    throw;
  }
  KinkRecorder::set_active(previous);
  return {value, recorder.signature(), recorder.flagged()};
}

}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f, std::span<Tensor> leaves,
                           const GradCheckOptions& options) {
  const Tensor loss = f();
  if (loss.numel() != 1) throw ShapeError("grad_check: function must return a scalar");
  const GradientMap grads = backward(loss, std::span<const Tensor>(leaves.data(), leaves.size()));
  const Probe base = evaluate(f);

  GradCheckResult result;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    const auto analytic = grads.at(leaf).values();
    auto values = leaf.leaf_values();
    const std::size_t n = values.size();
    const std::size_t count =
        options.max_coords_per_leaf == 0 ? n : std::min(n, options.max_coords_per_leaf);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t c = count == n ? k : (k * n) / count;
      const double original = values[c];
      values[c] = original + options.eps;
      const Probe plus = evaluate(f);
      values[c] = original - options.eps;
      const Probe minus = evaluate(f);
      values[c] = original;
      if (plus.signature != minus.signature || plus.signature != base.signature ||
          plus.flagged || minus.flagged) {
        ++result.excluded;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * options.eps);
      const double a = analytic[c];
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++result.checked;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst = "leaf " + std::to_string(li) + " coord " + std::to_string(c) +
                       ": analytic " + std::to_string(a) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double eps) {
  const auto v = x.values();
  Tensor leaf = Tensor::leaf(x.shape(), std::vector<double>(v.begin(), v.end()), true);
  std::vector<Tensor> leaves{leaf};
  GradCheckOptions options;
  options.eps = eps;
  return grad_check([&] { return f(leaf); }, leaves, options);
}

}  // namespace fourfield
