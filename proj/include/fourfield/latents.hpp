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

// Content/motion latent codes and the two conditioning networks.

#pragma once

#include <cstddef>
#include <vector>

#include "fourfield/config.hpp"
#include "fourfield/nn.hpp"
#include "fourfield/rng.hpp"
#include "fourfield/tensor.hpp"

namespace fourfield {

/// Isotropic direction: a standard-normal draw normalised to unit length.
std::vector<double> sample_unit_sphere(std::size_t dim, Rng& rng);

/// Linear interpolation followed by projection back onto the unit sphere.
std::vector<double> lerp_renormalize(const std::vector<double>& a, const std::vector<double>& b,
                                     double alpha);

struct LatentPair {
  std::vector<double> z;  // content code
  std::vector<double> m;  // motion code
};

LatentPair sample_latents(const ModelConfig& cfg, Rng& rng);

/// Stacks equally sized vectors into a constant [B, D] tensor.
Tensor stack_rows(const std::vector<std::vector<double>>& rows);

/// Content mapping z -> w: fully connected layers with leaky ReLU between them.
class MappingNetwork {
 public:
  static MappingNetwork create(const ModelConfig& cfg, Rng& rng);
  /// z: [B, content_dim] -> w: [B, style_dim].
  Tensor operator()(const Tensor& z) const;
  void collect(ParamList& out, const std::string& prefix) const;
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<Linear> layers_;
  double slope_ = 0.2;
};

/// Time-conditioned motion generator n(m, t): three fully connected layers,
/// with t multiplying the first layer's output (or the ablation variants).
class MotionGenerator {
 public:
  static MotionGenerator create(const ModelConfig& cfg, Rng& rng);
  /// m: [B, motion_dim]; t: B times in [0, 1] -> [B, motion_out].
  Tensor operator()(const Tensor& m, const std::vector<double>& t) const;
  /// Same network evaluated with another time-conditioning mode. Only the
  /// mode the weights were built for has matching layer shapes; concat needs
  /// one extra input to the second layer.
  Tensor evaluate(const Tensor& m, const std::vector<double>& t, MotionMode mode) const;
  MotionMode mode() const { return mode_; }
  std::size_t out_dim() const { return layers_[2].out_features(); }
  void collect(ParamList& out, const std::string& prefix) const;

 private:
  std::vector<Linear> layers_;
  MotionMode mode_ = MotionMode::Multiply;
  std::size_t time_bands_ = 4;
  double slope_ = 0.2;
};

/// Fourier features of t: [sin(2^k pi t), cos(2^k pi t)] for k < bands.
Tensor time_features(const std::vector<double>& t, std::size_t bands);

}  // namespace fourfield
