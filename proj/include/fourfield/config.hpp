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
#include <cstdint>
#include <string>
#include <vector>

namespace fourfield {

enum class MotionMode { Multiply, Concat, Positional };
enum class UpsampleMode { Direct, Up2x };

std::string to_string(MotionMode mode);
std::string to_string(UpsampleMode mode);
MotionMode parse_motion_mode(const std::string& text);
UpsampleMode parse_upsample_mode(const std::string& text);

struct ModelConfig {
  std::size_t content_dim = 64;
  std::size_t motion_dim = 64;
  std::size_t style_dim = 64;
  std::size_t mapping_layers = 8;
  std::size_t motion_hidden = 64;
  std::size_t motion_out = 32;
  MotionMode motion_mode = MotionMode::Multiply;
  std::size_t time_bands = 4;
  std::size_t fg_layers = 4;
  std::size_t fg_hidden = 32;
  std::size_t feature_dim = 32;
  std::size_t density_hidden = 16;
  bool background = true;
  std::size_t bg_layers = 4;
  std::size_t bg_hidden = 16;
  std::size_t pos_bands = 10;
  std::size_t dir_bands = 4;
  double lrelu_slope = 0.2;
  double demod_eps = 1e-8;
  std::vector<std::size_t> disc_channels{16, 32, 64};
};

struct RenderConfig {
  /// Side of the square output image.
  std::size_t resolution = 16;
  UpsampleMode upsample = UpsampleMode::Up2x;
  std::size_t samples = 16;
  std::size_t bg_samples = 4;
  double near = 0.5;
  double far = 2.0;
  double bg_max_radius = 16.0;
  double fov_deg = 18.0;
  double pitch_std = 0.15;
  double yaw_std = 0.3;

  /// Side of the ray grid that gets volume rendered.
  std::size_t ray_resolution() const {
    return upsample == UpsampleMode::Up2x ? resolution / 2 : resolution;
  }
};

struct TrainConfig {
  ModelConfig model;
  RenderConfig render;

  double lambda_r1 = 0.5;
  double lambda_path = 0.2;
  std::size_t r1_interval = 4;
  std::size_t path_samples = 16;
  bool image_disc = true;

  double lr = 0.0025;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double mapping_lr_scale = 0.01;
  double motion_lr_scale = 1.0;

  std::size_t batch = 8;
  std::size_t frames = 16;
  std::uint64_t seed = 0;
  /// Fraction of steps spent on image (static) batches in joint training.
  double joint_ratio = 0.0;

  std::string aug_policy = "flip,brightness";
  double aug_brightness = 0.1;

  /// Full-size dimensions used in the original experiments.
  static TrainConfig paper_scale();

  /// Throws ConfigError on an invalid combination.
  void validate() const;
};

/// Parses flat `section.key=value` lines; '#' starts a comment. Unknown keys
/// and malformed values throw ConfigError. Keys not mentioned keep `base`'s
/// value.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::string& path, TrainConfig base = {});
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Canonical text form; parse_config(to_text(c)) == c bit-exactly.
std::string to_text(const TrainConfig& cfg);

bool operator==(const TrainConfig& a, const TrainConfig& b);

}  // namespace fourfield
