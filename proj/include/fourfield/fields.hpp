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

// Time-conditioned implicit scene: the style-modulated foreground field with
// additive motion injection, its density head, and the background field over
// inverse-sphere coordinates.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "fourfield/config.hpp"
#include "fourfield/nn.hpp"
#include "fourfield/tensor.hpp"

namespace fourfield {

/// Per coordinate c: [sin(2^0 pi c), cos(2^0 pi c), ..., sin(2^(L-1) pi c),
/// cos(2^(L-1) pi c)]. [..., D] -> [..., 2 L D]; the raw coordinate is not
/// appended.
Tensor positional_encode(const Tensor& x, std::size_t bands);

/// (x / |x|, 1 / |x|) for |x| >= 1. Throws DomainError inside the unit sphere.
std::array<double, 4> inverse_sphere_param(const std::array<double, 3>& x);
/// Batched version over the last axis: [..., 3] -> [..., 4].
Tensor inverse_sphere_param(const Tensor& points);

struct FieldSample {
  Tensor feature;  // [B, P, feature_dim]
  Tensor density;  // [B, P], >= 0
};

/// Two-layer density head with softplus output.
struct DensityHead {
  Linear hidden;
  Linear out;
  double slope = 0.2;

  static DensityHead create(std::size_t feature_dim, std::size_t hidden_dim, double slope, Rng& rng);
  /// [B, P, F] -> [B, P]
  Tensor operator()(const Tensor& feature) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

class FgField {
 public:
  static FgField create(const ModelConfig& cfg, Rng& rng);

  /// points: [B, P, 3]; w: [B, style]; n: [B, motion_out] (zeros for the
  /// static mode).
  FieldSample operator()(const Tensor& points, const Tensor& w, const Tensor& n) const;
  void collect(ParamList& out, const std::string& prefix) const;

  std::size_t motion_dim() const;
  std::size_t injection_dim() const { return layers_.front().out_features(); }
  bool has_adapter() const { return adapter_.has_value(); }

 private:
  std::vector<ModulatedLinear> layers_;
  std::optional<Linear> adapter_;  // bias-free, so n = 0 injects nothing
  DensityHead density_;
  std::size_t bands_ = 10;
  double slope_ = 0.2;
  double eps_ = 1e-8;
};

/// Background field over inverse-sphere coordinates; modulated by content
/// only and never sees the motion vector.
class BgField {
 public:
  static BgField create(const ModelConfig& cfg, Rng& rng);

  /// x4: [B, P, 4] from inverse_sphere_param; w: [B, style].
  FieldSample operator()(const Tensor& x4, const Tensor& w) const;
  void collect(ParamList& out, const std::string& prefix) const;

 private:
  std::vector<ModulatedLinear> layers_;
  DensityHead density_;
  std::size_t bands_ = 10;
  double slope_ = 0.2;
  double eps_ = 1e-8;
};

}  // namespace fourfield
