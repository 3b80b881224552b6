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

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "fourfield/tensor.hpp"

namespace fourfield {

struct GradCheckOptions {
  double eps = 1e-4;
  /// 0 checks every coordinate; otherwise an evenly spaced subset per leaf.
  std::size_t max_coords_per_leaf = 0;
};

struct GradCheckResult {
  /// Worst |analytic - numeric| / max(1, |analytic|, |numeric|).
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose +/- eps probes fell on different sides of a kink.
  std::size_t excluded = 0;
  std::string worst;
};

/// Central-difference check of `f` (which must return a one-element tensor)
/// against reverse-mode gradients with respect to each leaf in `leaves`.
/// Leaves are perturbed in place and restored.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::span<Tensor> leaves,
                           const GradCheckOptions& options = {});

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double eps = 1e-4);

}  // namespace fourfield
