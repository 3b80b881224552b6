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

#include "fourfield/nn.hpp"

#include <algorithm>
#include <cmath>

namespace fourfield {

Tensor normal_param(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = stddev * rng.normal();
  return Tensor::leaf(std::move(shape), std::move(v), true);
}

Tensor constant_param(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return Tensor::leaf(std::move(shape), std::vector<double>(n, value), true);
}

Linear Linear::create(std::size_t in, std::size_t out, Rng& rng, bool with_bias) {
  Linear l;
  l.weight = normal_param({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  if (with_bias) l.bias = constant_param({out}, 0.0);
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.rank() < 2 || x.shape().back() != in_features()) {
    throw ShapeError("Linear: input " + shape_str(x.shape()) + " vs weight " +
                     shape_str(weight.shape()));
  }
  Tensor y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  if (bias.defined()) out.emplace_back(prefix + ".bias", bias);
}

Tensor modulated_apply(const Tensor& weight, const Tensor& bias, const Tensor& scales,
                       const Tensor& x, double eps) {
  const std::size_t in = weight.dim(0);
  const std::size_t out = weight.dim(1);
  if (scales.rank() != 2 || scales.dim(1) != in) {
    throw ShapeError("modulated_apply: scales " + shape_str(scales.shape()) + " vs weight " +
                     shape_str(weight.shape()));
  }
  const std::size_t batch = scales.dim(0);
  const bool flat = x.rank() == 2;
  if ((flat && (x.dim(0) != batch || x.dim(1) != in)) ||
      (!flat && (x.rank() != 3 || x.dim(0) != batch || x.dim(2) != in))) {
    throw ShapeError("modulated_apply: input " + shape_str(x.shape()) + " for weight " +
                     shape_str(weight.shape()) + " and batch " + std::to_string(batch));
  }
  const Tensor modulated = mul(reshape(weight, {1, in, out}), reshape(scales, {batch, in, 1}));
  const Tensor inv_norm = pow(add_scalar(sum(square(modulated), {1}, true), eps), -0.5);
  const Tensor demodulated = mul(modulated, inv_norm);
  const Tensor x3 = flat ? reshape(x, {batch, 1, in}) : x;
  Tensor y = add(matmul(x3, demodulated), bias);
  return flat ? reshape(y, {batch, out}) : y;
}

ModulatedLinear ModulatedLinear::create(std::size_t in, std::size_t out, std::size_t style_dim,
                                        Rng& rng) {
  ModulatedLinear l;
  l.weight = normal_param({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  l.bias = constant_param({out}, 0.0);
  l.style_weight = normal_param({style_dim, in}, 1.0 / std::sqrt(static_cast<double>(style_dim)), rng);
  l.style_bias = constant_param({in}, 1.0);
  return l;
}

Tensor ModulatedLinear::scales(const Tensor& w) const {
  if (w.rank() != 2 || w.dim(1) != style_weight.dim(0)) {
    throw ShapeError("ModulatedLinear: style " + shape_str(w.shape()) + " vs " +
                     shape_str(style_weight.shape()));
  }
  return add(matmul(w, style_weight), style_bias);
}

Tensor ModulatedLinear::operator()(const Tensor& w, const Tensor& x, double eps) const {
  return modulated_apply(weight, bias, scales(w), x, eps);
}

void ModulatedLinear::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
  out.emplace_back(prefix + ".style_weight", style_weight);
  out.emplace_back(prefix + ".style_bias", style_bias);
}

IndexMap im2col_index(std::size_t batch, std::size_t height, std::size_t width,
                      std::size_t channels, std::size_t kernel, std::size_t stride,
                      std::size_t pad, std::size_t& out_h, std::size_t& out_w) {
  if (height + 2 * pad < kernel || width + 2 * pad < kernel || stride == 0) {
    throw ShapeError("conv: kernel larger than padded input");
  }
  out_h = (height + 2 * pad - kernel) / stride + 1;
  out_w = (width + 2 * pad - kernel) / stride + 1;
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(batch * out_h * out_w * kernel * kernel * channels);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const auto iy = static_cast<std::int64_t>(oy * stride + ky) - static_cast<std::int64_t>(pad);
            const auto ix = static_cast<std::int64_t>(ox * stride + kx) - static_cast<std::int64_t>(pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::int64_t>(height) &&
                                ix < static_cast<std::int64_t>(width);
            for (std::size_t c = 0; c < channels; ++c) {
              idx->push_back(inside ? static_cast<std::int64_t>(
                                          ((b * height + static_cast<std::size_t>(iy)) * width +
                                           static_cast<std::size_t>(ix)) * channels + c)
                                    : -1);
            }
          }
        }
      }
    }
  }
  return idx;
}

Conv2d Conv2d::create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                      std::size_t stride, std::size_t pad, Rng& rng) {
  Conv2d c;
  const std::size_t fan_in = kernel * kernel * in_channels;
  c.weight = normal_param({fan_in, out_channels}, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  c.bias = constant_param({out_channels}, 0.0);
  c.kernel = kernel;
  c.stride = stride;
  c.pad = pad;
  return c;
}

Tensor Conv2d::operator()(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(3) != in_channels()) {
    throw ShapeError("Conv2d: input " + shape_str(x.shape()) + " expects " +
                     std::to_string(in_channels()) + " channels");
  }
  const std::size_t b = x.dim(0);
  std::size_t oh = 0, ow = 0;
  auto idx = im2col_index(b, x.dim(1), x.dim(2), x.dim(3), kernel, stride, pad, oh, ow);
  const std::size_t patch = kernel * kernel * in_channels();
  const Tensor cols = gather(x, idx, {b, oh * ow, patch});
  const Tensor y = add(matmul(cols, weight), bias);
  return reshape(y, {b, oh, ow, out_channels()});
}

void Conv2d::collect(ParamList& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Tensor upsample_nearest2x(const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("upsample_nearest2x: expected [B,H,W,C]");
  const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(b * 4 * h * w * c);
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t xx = 0; xx < 2 * w; ++xx)
        for (std::size_t ci = 0; ci < c; ++ci)
          idx->push_back(static_cast<std::int64_t>(((bi * h + y / 2) * w + xx / 2) * c + ci));
  return gather(x, idx, {b, 2 * h, 2 * w, c});
}

Tensor pad_edge(const Tensor& x, std::size_t pad) {
  if (x.rank() != 4) throw ShapeError("pad_edge: expected [B,H,W,C]");
  const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const std::size_t ph = h + 2 * pad, pw = w + 2 * pad;
  auto clamp = [pad](std::size_t i, std::size_t n) {
    return i < pad ? 0 : std::min(i - pad, n - 1);
  };
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(b * ph * pw * c);
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t y = 0; y < ph; ++y)
      for (std::size_t xx = 0; xx < pw; ++xx)
        for (std::size_t ci = 0; ci < c; ++ci)
          idx->push_back(static_cast<std::int64_t>(((bi * h + clamp(y, h)) * w + clamp(xx, w)) * c + ci));
  return gather(x, idx, {b, ph, pw, c});
}

Tensor flip_width(const Tensor& x, const std::vector<bool>& flip) {
  if (x.rank() != 4 || flip.size() != x.dim(0)) throw ShapeError("flip_width: shape mismatch");
  const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(x.numel());
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t xx = 0; xx < w; ++xx)
        for (std::size_t ci = 0; ci < c; ++ci) {
          const std::size_t sx = flip[bi] ? w - 1 - xx : xx;
          idx->push_back(static_cast<std::int64_t>(((bi * h + y) * w + sx) * c + ci));
        }
  return gather(x, idx, x.shape());
}

}  // namespace fourfield
