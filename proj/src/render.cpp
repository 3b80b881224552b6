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

#include "fourfield/render.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace fourfield {

namespace {

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(dot(v, v));
  if (n < 1e-12) throw DomainError("cannot normalise a zero vector");
  return {v[0] / n, v[1] / n, v[2] / n};
}

// Far intersection of the ray o + l d (|d| = 1) with the sphere of radius r.
double sphere_exit(const Vec3& o, const Vec3& d, double r) {
  const double b = dot(o, d);
  const double c = dot(o, o) - r * r;
  return -b + std::sqrt(std::max(0.0, b * b - c));
}

}  // namespace

CameraPose make_pose(double pitch, double yaw, double fov_deg) {
  if (!(fov_deg > 0.0 && fov_deg < 120.0)) throw DomainError("camera fov must lie in (0, 120) degrees");
  CameraPose p;
  p.pitch = pitch;
  p.yaw = yaw;
  p.fov_deg = fov_deg;
  p.position = {std::cos(pitch) * std::sin(yaw), std::sin(pitch), std::cos(pitch) * std::cos(yaw)};
  return p;
}

CameraPose sample_camera(const RenderConfig& cfg, Rng& rng) {
  const double pitch = cfg.pitch_std * rng.normal();
  const double yaw = cfg.yaw_std * rng.normal();
  return make_pose(pitch, yaw, cfg.fov_deg);
}

CameraBasis camera_basis(const CameraPose& pose) {
  const Vec3 forward = normalized({-pose.position[0], -pose.position[1], -pose.position[2]});
  const Vec3 right = normalized(cross(forward, {0.0, 1.0, 0.0}));
  const Vec3 up = cross(right, forward);
  return {forward, right, up};
}

Vec3 ray_direction(const CameraPose& pose, double u, double v, double aspect) {
  const auto basis = camera_basis(pose);
  const double half = std::tan(pose.fov_deg * std::numbers::pi / 360.0);
  const double su = u * half * aspect;
  const double sv = v * half;
  return normalized({basis.forward[0] + su * basis.right[0] + sv * basis.up[0],
                     basis.forward[1] + su * basis.right[1] + sv * basis.up[1],
                     basis.forward[2] + su * basis.right[2] + sv * basis.up[2]});
}

RayImage rays_for_camera(const CameraPose& pose, std::size_t height, std::size_t width,
                         double near, double far) {
  if (height == 0 || width == 0) throw DomainError("rays_for_camera: empty image");
  if (!(near >= 0.0 && near < far)) throw DomainError("rays_for_camera: need 0 <= near < far");
  RayImage img;
  img.height = height;
  img.width = width;
  img.origin = pose.position;
  img.near = near;
  img.far = far;
  img.directions.reserve(height * width);
  const double aspect = static_cast<double>(width) / static_cast<double>(height);
  for (std::size_t i = 0; i < height; ++i) {
    const double v = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(height);
    for (std::size_t j = 0; j < width; ++j) {
      const double u = 2.0 * (static_cast<double>(j) + 0.5) / static_cast<double>(width) - 1.0;
      img.directions.push_back(ray_direction(pose, u, v, aspect));
    }
  }
  return img;
}

SampleSpec SampleSpec::from(const RenderConfig& cfg, bool background) {
  SampleSpec s;
  s.samples = cfg.samples;
  s.bg_samples = cfg.bg_samples;
  s.near = cfg.near;
  s.far = cfg.far;
  s.bg_max_radius = cfg.bg_max_radius;
  s.background = background && cfg.bg_samples > 0;
  return s;
}

RaySamples place_samples(const std::vector<RayImage>& rays, const SampleSpec& spec, Rng* jitter) {
  if (spec.samples < 2) throw DomainError("volume rendering needs at least 2 samples per ray");
  if (!(spec.near < spec.far)) throw DomainError("volume rendering: near must be < far");
  if (rays.empty()) throw ShapeError("place_samples: no ray images");
  const std::size_t batch = rays.size();
  const std::size_t r_count = rays.front().directions.size();
  const std::size_t s_count = spec.samples;
  const std::size_t k_count = spec.background ? spec.bg_samples : 0;
  for (const auto& r : rays) {
    if (r.directions.size() != r_count) throw ShapeError("place_samples: ray images differ in size");
  }

  std::vector<double> fg_pts, fg_depth, fg_delta, bg_pts, bg_depth, bg_delta, dirs;
  fg_pts.reserve(batch * r_count * s_count * 3);
  fg_depth.reserve(batch * r_count * s_count);
  fg_delta.reserve(batch * r_count * s_count);
  dirs.reserve(batch * r_count * 3);
  const double bin = (spec.far - spec.near) / static_cast<double>(s_count);

  for (const auto& img : rays) {
    const Vec3& o = img.origin;
    for (const auto& d : img.directions) {
      dirs.insert(dirs.end(), d.begin(), d.end());
      for (std::size_t s = 0; s < s_count; ++s) {
        const double frac = jitter ? jitter->uniform() : 0.5;
        const double l = spec.near + (static_cast<double>(s) + frac) * bin;
        for (int c = 0; c < 3; ++c) fg_pts.push_back(o[c] + l * d[c]);
        fg_depth.push_back(l);
        fg_delta.push_back(bin);
      }
      if (k_count == 0) continue;
      const Vec3 exit{o[0] + spec.far * d[0], o[1] + spec.far * d[1], o[2] + spec.far * d[2]};
      const double u_start = 1.0 / std::sqrt(dot(exit, exit));
      const double u_end = 1.0 / spec.bg_max_radius;
      if (!(u_end < u_start)) throw DomainError("background: bg_max_radius inside the far bound");
      const double du = (u_start - u_end) / static_cast<double>(k_count);
      for (std::size_t k = 0; k < k_count; ++k) {
        const double u_hi = u_start - static_cast<double>(k) * du;
        const double u_lo = u_hi - du;
        const double frac = jitter ? jitter->uniform() : 0.5;
        const double u = u_hi - frac * du;
        const double l = sphere_exit(o, d, 1.0 / u);
        for (int c = 0; c < 3; ++c) bg_pts.push_back(o[c] + l * d[c]);
        bg_depth.push_back(l);
        bg_delta.push_back(sphere_exit(o, d, 1.0 / u_lo) - sphere_exit(o, d, 1.0 / u_hi));
      }
    }
  }

  RaySamples out;
  out.batch = batch;
  out.rays = r_count;
  out.fg_points = Tensor::constant({batch, r_count * s_count, 3}, std::move(fg_pts));
  out.fg_depth = Tensor::constant({batch, r_count, s_count}, std::move(fg_depth));
  out.fg_delta = Tensor::constant({batch, r_count, s_count}, std::move(fg_delta));
  out.view_dirs = Tensor::constant({batch, r_count, 3}, std::move(dirs));
  if (k_count > 0) {
    out.bg_points = Tensor::constant({batch, r_count * k_count, 3}, std::move(bg_pts));
    out.bg_depth = Tensor::constant({batch, r_count, k_count}, std::move(bg_depth));
    out.bg_delta = Tensor::constant({batch, r_count, k_count}, std::move(bg_delta));
  }
  return out;
}

CompositeResult composite(const Tensor& density, const Tensor& delta, const Tensor& features,
                          const Tensor& depths) {
  if (density.rank() != 3 || delta.shape() != density.shape() || depths.shape() != density.shape() ||
      features.rank() != 4 || features.dim(0) != density.dim(0) ||
      features.dim(1) != density.dim(1) || features.dim(2) != density.dim(2)) {
    throw ShapeError("composite: density " + shape_str(density.shape()) + ", features " +
                     shape_str(features.shape()));
  }
  for (double v : density.values()) {
    if (v < 0.0) throw DomainError("composite: negative density");
  }
  const std::size_t b = density.dim(0), r = density.dim(1), s = density.dim(2);
  const Tensor optical = mul(density, delta);
  const Tensor transmittance = exp(neg(cumsum_exclusive(optical)));
  const Tensor alpha = add_scalar(neg(exp(neg(optical))), 1.0);
  const Tensor weights = mul(transmittance, alpha);
  CompositeResult out;
  out.weights = weights;
  out.feature = sum(mul(reshape(weights, {b, r, s, 1}), features), {2});
  out.depth = sum(mul(weights, depths), {2});
  out.alpha = sum(weights, {2});
  out.residual = exp(neg(sum(optical, {2})));
  return out;
}

CompositeResult volume_render(const std::vector<RayImage>& rays, const SampleSpec& spec,
                              const FieldFn& fg, const FieldFn* bg, Rng* jitter) {
  SampleSpec effective = spec;
  effective.background = spec.background && bg != nullptr;
  const RaySamples samples = place_samples(rays, effective, jitter);
  const std::size_t b = samples.batch, r = samples.rays, s = effective.samples;

  const FieldSample f = fg(samples.fg_points);
  const std::size_t feat = f.feature.dim(2);
  Tensor density = reshape(f.density, {b, r, s});
  Tensor features = reshape(f.feature, {b, r, s, feat});
  Tensor delta = samples.fg_delta;
  Tensor depth = samples.fg_depth;
  if (samples.bg_points.defined()) {
    const std::size_t k = effective.bg_samples;
    const FieldSample g = (*bg)(samples.bg_points);
    if (g.feature.dim(2) != feat) throw ShapeError("volume_render: fg/bg feature dims differ");
    density = concat({density, reshape(g.density, {b, r, k})}, 2);
    features = concat({features, reshape(g.feature, {b, r, k, feat})}, 2);
    delta = concat({delta, samples.bg_delta}, 2);
    depth = concat({depth, samples.bg_depth}, 2);
  }
  return composite(density, delta, features, depth);
}

RayHead RayHead::create(const ModelConfig& cfg, Rng& rng) {
  RayHead h;
  h.bands_ = cfg.dir_bands;
  h.slope_ = cfg.lrelu_slope;
  h.eps_ = cfg.demod_eps;
  const std::size_t in = cfg.feature_dim + 6 * cfg.dir_bands;
  h.l0_ = ModulatedLinear::create(in, cfg.feature_dim, cfg.style_dim, rng);
  h.l1_ = ModulatedLinear::create(cfg.feature_dim, cfg.feature_dim, cfg.style_dim, rng);
  return h;
}

Tensor RayHead::operator()(const Tensor& w, const Tensor& feature, const Tensor& dirs) const {
  if (feature.rank() != 3 || dirs.rank() != 3 || dirs.dim(2) != 3 ||
      feature.dim(2) + 6 * bands_ != l0_.in_features()) {
    throw ShapeError("ray_feature_head: feature " + shape_str(feature.shape()) + ", dirs " +
                     shape_str(dirs.shape()));
  }
  const Tensor x = concat({feature, positional_encode(dirs, bands_)}, 2);
  return l1_(w, leaky_relu(l0_(w, x, eps_), slope_), eps_);
}

void RayHead::collect(ParamList& out, const std::string& prefix) const {
  l0_.collect(out, prefix + ".0");
  l1_.collect(out, prefix + ".1");
}

Upsampler Upsampler::create(const ModelConfig& cfg, UpsampleMode mode, Rng& rng) {
  Upsampler u;
  u.mode_ = mode;
  u.slope_ = cfg.lrelu_slope;
  u.to_rgb_ = Linear::create(cfg.feature_dim, 3, rng);
  if (mode == UpsampleMode::Up2x) {
    u.conv_ = Conv2d::create(cfg.feature_dim, cfg.feature_dim, 3, 1, 0, rng);
  }
  return u;
}

Tensor Upsampler::to_rgb_direct(const Tensor& features) const {
  if (features.rank() != 4) throw ShapeError("upsample: expected [B, h, w, F]");
  return sigmoid(to_rgb_(features));
}

Tensor Upsampler::operator()(const Tensor& features) const {
  if (mode_ == UpsampleMode::Direct) return to_rgb_direct(features);
  if (features.rank() != 4) throw ShapeError("upsample: expected [B, h, w, F]");
  const Tensor h = leaky_relu((*conv_)(pad_edge(upsample_nearest2x(features), 1)), slope_);
  return sigmoid(to_rgb_(h));
}

void Upsampler::collect(ParamList& out, const std::string& prefix) const {
  to_rgb_.collect(out, prefix + ".to_rgb");
  if (conv_) conv_->collect(out, prefix + ".conv");
}

Generator Generator::create(const ModelConfig& cfg, UpsampleMode upsample, Rng& rng) {
  Generator g{cfg,
              MappingNetwork::create(cfg, rng),
              MotionGenerator::create(cfg, rng),
              FgField::create(cfg, rng),
              std::nullopt,
              RayHead{},
              Upsampler{}};
  if (cfg.background) g.bg = BgField::create(cfg, rng);
  g.head = RayHead::create(cfg, rng);
  g.up = Upsampler::create(cfg, upsample, rng);
  return g;
}

ParamList Generator::mapping_params(const std::string& prefix) const {
  ParamList out;
  mapping.collect(out, prefix + ".mapping");
  return out;
}

ParamList Generator::motion_params(const std::string& prefix) const {
  ParamList out;
  motion.collect(out, prefix + ".motion");
  return out;
}

ParamList Generator::synthesis_params(const std::string& prefix) const {
  ParamList out;
  fg.collect(out, prefix + ".fg");
  if (bg) bg->collect(out, prefix + ".bg");
  head.collect(out, prefix + ".head");
  up.collect(out, prefix + ".up");
  return out;
}

void Generator::collect(ParamList& out, const std::string& prefix) const {
  for (const ParamList& part :
       {mapping_params(prefix), motion_params(prefix), synthesis_params(prefix)}) {
    out.insert(out.end(), part.begin(), part.end());
  }
}

RenderOutput render_batch(const Generator& gen, const RenderRequest& request,
                          const RenderConfig& cfg, Rng* jitter) {
  const std::size_t batch = request.poses.size();
  if (batch == 0 || request.z.dim(0) != batch || request.m.dim(0) != batch ||
      request.t.size() != batch) {
    throw ShapeError("render_batch: latents, times and poses must agree in count");
  }
  const std::size_t res = cfg.ray_resolution();
  if (res == 0) throw DomainError("render_batch: ray resolution is zero");

  const Tensor w = gen.mapping(request.z);
  Tensor n;
  if (request.static_mode) {
    n = Tensor::zeros({batch, gen.motion.out_dim()});
  } else {
    n = gen.motion(request.m, request.t);
  }

  std::vector<RayImage> rays;
  rays.reserve(batch);
  for (const auto& pose : request.poses) rays.push_back(rays_for_camera(pose, res, res, cfg.near, cfg.far));

  const FieldFn fg = [&](const Tensor& pts) { return gen.fg(pts, w, n); };
  const FieldFn bg = [&](const Tensor& pts) { return (*gen.bg)(inverse_sphere_param(pts), w); };
  const SampleSpec spec = SampleSpec::from(cfg, gen.bg.has_value());
  const RaySamples samples = place_samples(rays, spec, jitter);

  const std::size_t r = samples.rays, s = spec.samples;
  const FieldSample f = fg(samples.fg_points);
  const std::size_t feat = f.feature.dim(2);
  Tensor density = reshape(f.density, {batch, r, s});
  Tensor features = reshape(f.feature, {batch, r, s, feat});
  Tensor delta = samples.fg_delta;
  Tensor depth = samples.fg_depth;
  if (samples.bg_points.defined()) {
    const std::size_t k = spec.bg_samples;
    const FieldSample g = bg(samples.bg_points);
    density = concat({density, reshape(g.density, {batch, r, k})}, 2);
    features = concat({features, reshape(g.feature, {batch, r, k, feat})}, 2);
    delta = concat({delta, samples.bg_delta}, 2);
    depth = concat({depth, samples.bg_depth}, 2);
  }
  const CompositeResult comp = composite(density, delta, features, depth);

  const Tensor head = gen.head(w, comp.feature, samples.view_dirs);
  RenderOutput out;
  out.features = reshape(head, {batch, res, res, feat});
  out.rgb = gen.up(out.features);
  out.depth = reshape(comp.depth, {batch, res, res});
  out.alpha = reshape(comp.alpha, {batch, res, res});
  out.motion = n;
  return out;
}

FrameImage render_frame(const Generator& gen, const CameraPose& pose, double t,
                        const LatentPair& latents, const RenderConfig& cfg, bool static_mode) {
  RenderRequest req;
  req.z = stack_rows({latents.z});
  req.m = stack_rows({latents.m});
  req.t = {t};
  req.poses = {pose};
  req.static_mode = static_mode;
  auto frames = frames_from_tensor(render_batch(gen, req, cfg).rgb);
  frames.front().t = t;
  frames.front().pose = pose;
  return frames.front();
}

std::vector<FrameImage> frames_from_tensor(const Tensor& rgb) {
  if (rgb.rank() != 4 || rgb.dim(3) != 3) throw ShapeError("frames_from_tensor: expected [B,H,W,3]");
  const std::size_t b = rgb.dim(0), h = rgb.dim(1), w = rgb.dim(2);
  std::vector<FrameImage> frames(b);
  const auto v = rgb.values();
  for (std::size_t i = 0; i < b; ++i) {
    frames[i].height = h;
    frames[i].width = w;
    frames[i].rgb.assign(v.begin() + static_cast<std::ptrdiff_t>(i * h * w * 3),
                         v.begin() + static_cast<std::ptrdiff_t>((i + 1) * h * w * 3));
  }
  return frames;
}

Tensor tensor_from_frames(const std::vector<FrameImage>& frames) {
  if (frames.empty()) throw ShapeError("tensor_from_frames: no frames");
  const std::size_t h = frames.front().height, w = frames.front().width;
  std::vector<double> v;
  v.reserve(frames.size() * h * w * 3);
  for (const auto& f : frames) {
    if (f.height != h || f.width != w || f.rgb.size() != h * w * 3) {
      throw ShapeError("tensor_from_frames: frames differ in resolution");
    }
    v.insert(v.end(), f.rgb.begin(), f.rgb.end());
  }
  return Tensor::constant({frames.size(), h, w, 3}, std::move(v));
}

}  // namespace fourfield
