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

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "fourfield/nn.hpp"
#include "fourfield/rng.hpp"
#include "fourfield/tensor.hpp"

namespace fourfield {

/// Two frames of one clip, t_b > t_a.
struct FramePair {
  Tensor a;  // [H, W, 3]
  Tensor b;  // [H, W, 3]
  double dt = 0.0;
};

/// Builds the 7-channel input [RGB(a) | RGB(b) | dt] from batched frames
/// a, b: [B, H, W, 3].
Tensor pair_to_input(const Tensor& a, const Tensor& b, const std::vector<double>& dt);
Tensor pair_to_input(const FramePair& pair);

class Discriminator {
 public:
  static Discriminator create(std::size_t in_channels, const std::vector<std::size_t>& channels,
                              double slope, Rng& rng);
  /// x: [B, H, W, C] -> [B] logits.
  Tensor operator()(const Tensor& x) const;
  std::size_t in_channels() const { return convs_.front().in_channels(); }
  void collect(ParamList& out, const std::string& prefix) const;

 private:
  std::vector<Conv2d> convs_;
  Linear head_;
  double slope_ = 0.2;
};

struct AugmentPolicy {
  bool flip = false;
  bool brightness = false;
  double brightness_range = 0.1;

  /// Comma-separated subset of {flip, brightness, none}.
  static AugmentPolicy parse(const std::string& text, double brightness_range);
};

/// One draw of augmentation parameters for a batch. The same draw is applied
/// to real and generated inputs within a step.
struct AugmentParams {
  std::vector<bool> flip;
  std::vector<std::array<double, 3>> shift;

  static AugmentParams draw(std::size_t batch, const AugmentPolicy& policy, Rng& rng);
  static AugmentParams identity(std::size_t batch);
  /// frames: [B, H, W, 3].
  Tensor apply(const Tensor& frames) const;
};

}  // namespace fourfield
