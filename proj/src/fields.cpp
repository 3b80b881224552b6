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

#include "fourfield/fields.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace fourfield {

Tensor positional_encode(const Tensor& x, std::size_t bands) {
  if (bands == 0) throw DomainError("positional_encode: bands must be >= 1");
  if (x.rank() == 0) throw ShapeError("positional_encode: expected [..., D]");
  std::vector<double> freqs(bands);
  for (std::size_t k = 0; k < bands; ++k) freqs[k] = std::ldexp(std::numbers::pi, static_cast<int>(k));
  Shape expanded = x.shape();
  expanded.push_back(1);
  const Tensor args = mul(reshape(x, expanded), Tensor::constant({bands}, freqs));  // [..., D, L]
  Shape pair_shape = args.shape();
  pair_shape.push_back(1);
  const Tensor both = concat({reshape(sin(args), pair_shape), reshape(cos(args), pair_shape)},
                             pair_shape.size() - 1);  // [..., D, L, 2]
  Shape out = x.shape();
  out.back() *= 2 * bands;
  return reshape(both, out);
}

std::array<double, 4> inverse_sphere_param(const std::array<double, 3>& x) {
  const double r = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  if (!(r >= 1.0 - 1e-9)) throw DomainError("inverse_sphere_param: point inside the unit sphere");
  return {x[0] / r, x[1] / r, x[2] / r, 1.0 / r};
}

Tensor inverse_sphere_param(const Tensor& points) {
  if (points.rank() == 0 || points.shape().back() != 3) {
    throw ShapeError("inverse_sphere_param: expected [..., 3]");
  }
  const auto v = points.values();
  for (std::size_t i = 0; i < v.size(); i += 3) {
    const double r2 = v[i] * v[i] + v[i + 1] * v[i + 1] + v[i + 2] * v[i + 2];
    if (!(std::sqrt(r2) >= 1.0 - 1e-9)) {
      throw DomainError("inverse_sphere_param: point inside the unit sphere");
    }
  }
  const Tensor inv_r = pow(sum(square(points), {points.rank() - 1}, true), -0.5);
  return concat({mul(points, inv_r), inv_r}, points.rank() - 1);
}

DensityHead DensityHead::create(std::size_t feature_dim, std::size_t hidden_dim, double slope,
                                Rng& rng) {
  DensityHead h;
  h.hidden = Linear::create(feature_dim, hidden_dim, rng);
  h.out = Linear::create(hidden_dim, 1, rng);
  h.slope = slope;
  return h;
}

Tensor DensityHead::operator()(const Tensor& feature) const {
  const Tensor raw = out(leaky_relu(hidden(feature), slope));
  Shape shape = raw.shape();
  shape.pop_back();
  return softplus(reshape(raw, shape));
}

void DensityHead::collect(ParamList& out_list, const std::string& prefix) const {
  hidden.collect(out_list, prefix + ".0");
  out.collect(out_list, prefix + ".1");
}

FgField FgField::create(const ModelConfig& cfg, Rng& rng) {
  FgField f;
  f.bands_ = cfg.pos_bands;
  f.slope_ = cfg.lrelu_slope;
  f.eps_ = cfg.demod_eps;
  const std::size_t in = 2 * cfg.pos_bands * 3;
  for (std::size_t i = 0; i < cfg.fg_layers; ++i) {
    const std::size_t fan_in = i == 0 ? in : cfg.fg_hidden;
    const std::size_t fan_out = i + 1 == cfg.fg_layers ? cfg.feature_dim : cfg.fg_hidden;
    f.layers_.push_back(ModulatedLinear::create(fan_in, fan_out, cfg.style_dim, rng));
  }
  if (cfg.motion_out != f.layers_.front().out_features()) {
    f.adapter_ = Linear::create(cfg.motion_out, f.layers_.front().out_features(), rng, false);
  }
  f.density_ = DensityHead::create(cfg.feature_dim, cfg.density_hidden, cfg.lrelu_slope, rng);
  return f;
}

std::size_t FgField::motion_dim() const {
  return adapter_ ? adapter_->in_features() : layers_.front().out_features();
}

FieldSample FgField::operator()(const Tensor& points, const Tensor& w, const Tensor& n) const {
  if (points.rank() != 3 || points.dim(2) != 3) {
    throw ShapeError("fg_field: points must be [B, P, 3], got " + shape_str(points.shape()));
  }
  const std::size_t batch = points.dim(0);
  if (n.rank() != 2 || n.dim(0) != batch || n.dim(1) != motion_dim()) {
    throw ShapeError("fg_field: motion vector " + shape_str(n.shape()) + " but field expects [" +
                     std::to_string(batch) + "," + std::to_string(motion_dim()) + "]");
  }
  Tensor h = layers_[0](w, positional_encode(points, bands_), eps_);
  const Tensor injected = adapter_ ? (*adapter_)(n) : n;
  h = add(h, reshape(injected, {batch, 1, injection_dim()}));
  h = leaky_relu(h, slope_);
  for (std::size_t i = 1; i < layers_.size(); ++i) h = leaky_relu(layers_[i](w, h, eps_), slope_);
  return {h, density_(h)};
}

void FgField::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(out, prefix + ".layer" + std::to_string(i));
  if (adapter_) adapter_->collect(out, prefix + ".adapter");
  density_.collect(out, prefix + ".density");
}

BgField BgField::create(const ModelConfig& cfg, Rng& rng) {
  BgField f;
  f.bands_ = cfg.pos_bands;
  f.slope_ = cfg.lrelu_slope;
  f.eps_ = cfg.demod_eps;
  const std::size_t in = 2 * cfg.pos_bands * 4;
  for (std::size_t i = 0; i < cfg.bg_layers; ++i) {
    const std::size_t fan_in = i == 0 ? in : cfg.bg_hidden;
    const std::size_t fan_out = i + 1 == cfg.bg_layers ? cfg.feature_dim : cfg.bg_hidden;
    f.layers_.push_back(ModulatedLinear::create(fan_in, fan_out, cfg.style_dim, rng));
  }
  f.density_ = DensityHead::create(cfg.feature_dim, cfg.density_hidden, cfg.lrelu_slope, rng);
  return f;
}

FieldSample BgField::operator()(const Tensor& x4, const Tensor& w) const {
  if (x4.rank() != 3 || x4.dim(2) != 4) {
    throw ShapeError("bg_field: expected [B, P, 4], got " + shape_str(x4.shape()));
  }
  for (std::size_t i = 3; i < x4.numel(); i += 4) {
    const double u = x4.values()[i];
    if (!(u > 0.0 && u <= 1.0 + 1e-9)) throw DomainError("bg_field: inverse radius outside (0, 1]");
  }
  Tensor h = positional_encode(x4, bands_);
  for (const auto& layer : layers_) h = leaky_relu(layer(w, h, eps_), slope_);
  return {h, density_(h)};
}

void BgField::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(out, prefix + ".layer" + std::to_string(i));
  density_.collect(out, prefix + ".density");
}

}  // namespace fourfield
