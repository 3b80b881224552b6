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

// Cameras, rays, discrete volume rendering and the image-space head that
// turns aggregated ray features into RGB frames.

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "fourfield/config.hpp"
#include "fourfield/fields.hpp"
#include "fourfield/latents.hpp"
#include "fourfield/nn.hpp"
#include "fourfield/rng.hpp"
#include "fourfield/tensor.hpp"

namespace fourfield {

using Vec3 = std::array<double, 3>;

/// Camera on the unit sphere looking at the origin with a +y up vector.
struct CameraPose {
  Vec3 position{0.0, 0.0, 1.0};
  double pitch = 0.0;
  double yaw = 0.0;
  double fov_deg = 18.0;
};

/// pitch/yaw in radians around the frontal direction (0, 0, 1).
CameraPose make_pose(double pitch, double yaw, double fov_deg);
/// pitch ~ Normal(0, pitch_std), yaw ~ Normal(0, yaw_std).
CameraPose sample_camera(const RenderConfig& cfg, Rng& rng);

struct CameraBasis {
  Vec3 forward;
  Vec3 right;
  Vec3 up;
};
CameraBasis camera_basis(const CameraPose& pose);

/// Pinhole ray through normalised image coordinates u, v in [-1, 1]
/// (u to the right, v up); `aspect` is width / height.
Vec3 ray_direction(const CameraPose& pose, double u, double v, double aspect);

struct RayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  Vec3 origin{};
  std::vector<Vec3> directions;  // row-major, unit length
  double near = 0.5;
  double far = 2.0;
};

/// One ray per pixel centre.
RayImage rays_for_camera(const CameraPose& pose, std::size_t height, std::size_t width,
                         double near, double far);

struct SampleSpec {
  std::size_t samples = 16;
  std::size_t bg_samples = 4;
  double near = 0.5;
  double far = 2.0;
  double bg_max_radius = 16.0;
  bool background = true;

  static SampleSpec from(const RenderConfig& cfg, bool background);
};

/// Sample positions along a batch of ray images. Foreground samples sit in
/// S equal bins over [near, far] (bin midpoints, or jittered inside each bin
/// when a generator is supplied). Background samples continue the same ray
/// past `far` in bins uniform in inverse radius, out to bg_max_radius.
struct RaySamples {
  std::size_t batch = 0;
  std::size_t rays = 0;
  Tensor fg_points;  // [B, R*S, 3]
  Tensor fg_depth;   // [B, R, S]
  Tensor fg_delta;   // [B, R, S]
  Tensor bg_points;  // [B, R*K, 3], undefined without background
  Tensor bg_depth;   // [B, R, K]
  Tensor bg_delta;   // [B, R, K]
  Tensor view_dirs;  // [B, R, 3]
};

RaySamples place_samples(const std::vector<RayImage>& rays, const SampleSpec& spec, Rng* jitter);

struct CompositeResult {
  Tensor feature;   // [B, R, F]
  Tensor depth;     // [B, R]
  Tensor alpha;     // [B, R], sum of weights
  Tensor weights;   // [B, R, S]
  Tensor residual;  // [B, R], transmittance left after the last sample
};

/// Ordered quadrature: alpha_j = 1 - exp(-sigma_j delta_j),
/// T_j = prod_{k<j} (1 - alpha_k), weight_j = T_j alpha_j.
CompositeResult composite(const Tensor& density, const Tensor& delta, const Tensor& features,
                          const Tensor& depths);

/// points [B, P, 3] -> (feature [B, P, F], density [B, P])
using FieldFn = std::function<FieldSample(const Tensor&)>;

/// Foreground samples go to `fg`; background samples (past `far`) go to
/// `bg`, which receives raw 3D points. Both are composited in one ordered
/// quadrature. Throws DomainError when spec.samples < 2.
CompositeResult volume_render(const std::vector<RayImage>& rays, const SampleSpec& spec,
                              const FieldFn& fg, const FieldFn* bg, Rng* jitter = nullptr);

/// Two modulated layers over concat(aggregated feature, encoded view
/// direction).
class RayHead {
 public:
  static RayHead create(const ModelConfig& cfg, Rng& rng);
  /// feature: [B, R, F]; dirs: [B, R, 3] -> [B, R, F]
  Tensor operator()(const Tensor& w, const Tensor& feature, const Tensor& dirs) const;
  void collect(ParamList& out, const std::string& prefix) const;

 private:
  ModulatedLinear l0_;
  ModulatedLinear l1_;
  std::size_t bands_ = 4;
  double slope_ = 0.2;
  double eps_ = 1e-8;
};

/// Feature image -> RGB in (0, 1). `direct` is a per-pixel affine map and a
/// sigmoid; `up2x` is nearest x2, 3x3 conv, leaky ReLU, then the same
/// per-pixel map and sigmoid.
class Upsampler {
 public:
  static Upsampler create(const ModelConfig& cfg, UpsampleMode mode, Rng& rng);
  UpsampleMode mode() const { return mode_; }
  /// [B, h, w, F] -> [B, h', w', 3]
  Tensor operator()(const Tensor& features) const;
  /// The per-pixel feature-to-RGB map applied without upsampling.
  Tensor to_rgb_direct(const Tensor& features) const;
  void collect(ParamList& out, const std::string& prefix) const;

 private:
  UpsampleMode mode_ = UpsampleMode::Up2x;
  Linear to_rgb_;
  std::optional<Conv2d> conv_;
  double slope_ = 0.2;
};

struct Generator {
  ModelConfig cfg;
  MappingNetwork mapping;
  MotionGenerator motion;
  FgField fg;
  std::optional<BgField> bg;
  RayHead head;
  Upsampler up;

  static Generator create(const ModelConfig& cfg, UpsampleMode upsample, Rng& rng);
  void collect(ParamList& out, const std::string& prefix) const;
  ParamList mapping_params(const std::string& prefix) const;
  ParamList motion_params(const std::string& prefix) const;
  /// Everything except mapping and motion networks.
  ParamList synthesis_params(const std::string& prefix) const;
};

struct RenderRequest {
  Tensor z;  // [B, content_dim]
  Tensor m;  // [B, motion_dim]
  std::vector<double> t;
  std::vector<CameraPose> poses;
  /// Forces the motion vector to zero.
  bool static_mode = false;
};

struct RenderOutput {
  Tensor rgb;       // [B, H, W, 3]
  Tensor features;  // [B, h, w, F], ray-head output at ray resolution
  Tensor depth;     // [B, h, w]
  Tensor alpha;     // [B, h, w]
  Tensor motion;    // [B, motion_out]
};

/// mapping -> motion vector -> rays -> volume_render -> ray head -> upsampler.
/// Rays are sampled at bin midpoints unless `jitter` is given.
RenderOutput render_batch(const Generator& gen, const RenderRequest& request,
                          const RenderConfig& cfg, Rng* jitter = nullptr);

struct FrameImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> rgb;  // row-major H x W x 3 in [0, 1]
  double t = 0.0;
  CameraPose pose;
};

/// Single frame I_p(t; z, m).
FrameImage render_frame(const Generator& gen, const CameraPose& pose, double t,
                        const LatentPair& latents, const RenderConfig& cfg,
                        bool static_mode = false);

/// Splits [B, H, W, 3] into frames.
std::vector<FrameImage> frames_from_tensor(const Tensor& rgb);
/// Stacks frames into a constant [B, H, W, 3] tensor.
Tensor tensor_from_frames(const std::vector<FrameImage>& frames);

}  // namespace fourfield
