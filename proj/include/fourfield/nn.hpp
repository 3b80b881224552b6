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

// Layer building blocks shared by the generator and the discriminators.

#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fourfield/rng.hpp"
#include "fourfield/tensor.hpp"

namespace fourfield {

using ParamList = std::vector<std::pair<std::string, Tensor>>;

/// Trainable leaf with entries drawn from Normal(0, stddev).
Tensor normal_param(Shape shape, double stddev, Rng& rng);
Tensor constant_param(Shape shape, double value);

/// Affine layer y = x W + b with W of shape [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;  // undefined for bias-free layers

  /// Weights ~ Normal(0, 1/sqrt(in)), zero bias.
  static Linear create(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  /// x: [..., in] with rank >= 2.
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Applies a weight modulated per batch element by `scales` and demodulated
/// per output unit:
///   W'_b = W diag(s_b),  W''_b[:, o] = W'_b[:, o] / sqrt(sum_i W'_b[i, o]^2 + eps)
/// x: [B, P, in] or [B, in]; scales: [B, in].
Tensor modulated_apply(const Tensor& weight, const Tensor& bias, const Tensor& scales,
                       const Tensor& x, double eps);

/// Style-modulated affine layer. An affine map of the style vector yields the
/// per-input-channel scales.
struct ModulatedLinear {
  Tensor weight;        // [in, out]
  Tensor bias;          // [out]
  Tensor style_weight;  // [style, in]
  Tensor style_bias;    // [in], initialised to 1

  static ModulatedLinear create(std::size_t in, std::size_t out, std::size_t style_dim, Rng& rng);
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  Tensor scales(const Tensor& w) const;
  /// w: [B, style]; x: [B, P, in] or [B, in].
  Tensor operator()(const Tensor& w, const Tensor& x, double eps) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// k x k convolution on channel-last images [B, H, W, C], zero padding.
struct Conv2d {
  Tensor weight;  // [k*k*C_in, C_out], row index (ky*k + kx)*C_in + c
  Tensor bias;    // [C_out]
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;

  static Conv2d create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                       std::size_t stride, std::size_t pad, Rng& rng);
  std::size_t in_channels() const { return weight.dim(0) / (kernel * kernel); }
  std::size_t out_channels() const { return weight.dim(1); }
  Tensor operator()(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Index map turning [B, H, W, C] into patch rows [B, Ho*Wo, k*k*C]
/// (-1 marks padding).
IndexMap im2col_index(std::size_t batch, std::size_t height, std::size_t width,
                      std::size_t channels, std::size_t kernel, std::size_t stride,
                      std::size_t pad, std::size_t& out_h, std::size_t& out_w);

/// Nearest-neighbour x2 upsampling of [B, H, W, C].
Tensor upsample_nearest2x(const Tensor& x);
/// Mirrors [B, H, W, C] along W for the batch entries where flip[b] is set.
/// Replicates border pixels outward by `pad` on both spatial axes.
Tensor pad_edge(const Tensor& x, std::size_t pad);
Tensor flip_width(const Tensor& x, const std::vector<bool>& flip);

}  // namespace fourfield
