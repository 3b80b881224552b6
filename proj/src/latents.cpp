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

#include "fourfield/latents.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace fourfield {

std::vector<double> sample_unit_sphere(std::size_t dim, Rng& rng) {
  if (dim == 0) throw DomainError("sample_unit_sphere: dim must be >= 1");
  std::vector<double> v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm2 += x * x;
    }
  } while (norm2 < 1e-300);
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : v) x *= inv;
  return v;
}

std::vector<double> lerp_renormalize(const std::vector<double>& a, const std::vector<double>& b,
                                     double alpha) {
  if (a.size() != b.size()) throw ShapeError("lerp_renormalize: size mismatch");
  std::vector<double> out(a.size());
  double norm2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = (1.0 - alpha) * a[i] + alpha * b[i];
    norm2 += out[i] * out[i];
  }
  if (norm2 < 1e-24) throw DomainError("lerp_renormalize: interpolant vanishes");
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& x : out) x *= inv;
  return out;
}

LatentPair sample_latents(const ModelConfig& cfg, Rng& rng) {
  LatentPair p;
  p.z = sample_unit_sphere(cfg.content_dim, rng);
  p.m = sample_unit_sphere(cfg.motion_dim, rng);
  return p;
}

Tensor stack_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t d = rows.front().size();
  std::vector<double> v;
  v.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) throw ShapeError("stack_rows: ragged rows");
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor::constant({rows.size(), d}, std::move(v));
}

MappingNetwork MappingNetwork::create(const ModelConfig& cfg, Rng& rng) {
  MappingNetwork net;
  net.slope_ = cfg.lrelu_slope;
  for (std::size_t i = 0; i < cfg.mapping_layers; ++i) {
    const std::size_t in = i == 0 ? cfg.content_dim : cfg.style_dim;
    net.layers_.push_back(Linear::create(in, cfg.style_dim, rng));
  }
  return net;
}

Tensor MappingNetwork::operator()(const Tensor& z) const {
  if (z.rank() != 2 || z.dim(1) != layers_.front().in_features()) {
    throw ShapeError("content mapping: code " + shape_str(z.shape()) + " but network expects " +
                     std::to_string(layers_.front().in_features()) + " dims");
  }
  Tensor h = z;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i](h);
    if (i + 1 < layers_.size()) h = leaky_relu(h, slope_);
  }
  return h;
}

void MappingNetwork::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(out, prefix + "." + std::to_string(i));
}

MotionGenerator MotionGenerator::create(const ModelConfig& cfg, Rng& rng) {
  MotionGenerator net;
  net.mode_ = cfg.motion_mode;
  net.time_bands_ = cfg.time_bands;
  net.slope_ = cfg.lrelu_slope;
  const std::size_t extra = cfg.motion_mode == MotionMode::Concat ? 1 : 0;
  net.layers_.push_back(Linear::create(cfg.motion_dim, cfg.motion_hidden, rng));
  net.layers_.push_back(Linear::create(cfg.motion_hidden + extra, cfg.motion_hidden, rng));
  net.layers_.push_back(Linear::create(cfg.motion_hidden, cfg.motion_out, rng));
  return net;
}

Tensor time_features(const std::vector<double>& t, std::size_t bands) {
  std::vector<double> v;
  v.reserve(t.size() * 2 * bands);
  for (double ti : t) {
    for (std::size_t k = 0; k < bands; ++k) {
      const double arg = std::ldexp(std::numbers::pi, static_cast<int>(k)) * ti;
      v.push_back(std::sin(arg));
      v.push_back(std::cos(arg));
    }
  }
  return Tensor::constant({t.size(), 2 * bands}, std::move(v));
}

Tensor MotionGenerator::operator()(const Tensor& m, const std::vector<double>& t) const {
  return evaluate(m, t, mode_);
}

Tensor MotionGenerator::evaluate(const Tensor& m, const std::vector<double>& t,
                                 MotionMode mode) const {
  if (m.rank() != 2 || m.dim(1) != layers_[0].in_features()) {
    throw ShapeError("motion generator: code " + shape_str(m.shape()) + " but network expects " +
                     std::to_string(layers_[0].in_features()) + " dims");
  }
  if (t.size() != m.dim(0)) throw ShapeError("motion generator: one time per code required");
  for (double ti : t) {
    if (!(ti >= 0.0 && ti <= 1.0)) throw DomainError("motion generator: t outside [0, 1]");
  }
  const std::size_t batch = m.dim(0);
  const Tensor h1 = layers_[0](m);
  const std::size_t hidden = h1.dim(1);
  Tensor h;
  switch (mode) {
    case MotionMode::Multiply:
      h = mul(h1, Tensor::constant({batch, 1}, t));
      break;
    case MotionMode::Concat:
      h = concat({h1, Tensor::constant({batch, 1}, t)}, 1);
      break;
    case MotionMode::Positional: {
      // Hidden channel c is scaled by time feature c mod (2 * bands).
      const Tensor feats = time_features(t, time_bands_);
      const std::size_t nf = feats.dim(1);
      auto idx = std::make_shared<std::vector<std::int64_t>>();
      idx->reserve(batch * hidden);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < hidden; ++c)
          idx->push_back(static_cast<std::int64_t>(b * nf + c % nf));
      h = mul(h1, gather(feats, idx, {batch, hidden}));
      break;
    }
  }
  h = leaky_relu(h, slope_);
  if (h.dim(1) != layers_[1].in_features()) {
    throw ShapeError("motion generator: weights were not built for mode " + to_string(mode));
  }
  h = leaky_relu(layers_[1](h), slope_);
  return layers_[2](h);
}

void MotionGenerator::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(out, prefix + "." + std::to_string(i));
}

}  // namespace fourfield
