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

#include "fourfield/discriminators.hpp"

#include <sstream>

namespace fourfield {

Tensor pair_to_input(const Tensor& a, const Tensor& b, const std::vector<double>& dt) {
  if (a.rank() != 4 || a.dim(3) != 3 || a.shape() != b.shape()) {
    throw ShapeError("pair_to_input: frames " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " must both be [B, H, W, 3]");
  }
  const std::size_t batch = a.dim(0), h = a.dim(1), w = a.dim(2);
  if (dt.size() != batch) throw ShapeError("pair_to_input: one dt per pair required");
  std::vector<double> plane;
  plane.reserve(batch * h * w);
  for (double d : dt) {
    if (!(d > 0.0)) throw DomainError("pair_to_input: dt must be > 0");
    plane.insert(plane.end(), h * w, d);
  }
  return concat({a, b, Tensor::constant({batch, h, w, 1}, std::move(plane))}, 3);
}

Tensor pair_to_input(const FramePair& pair) {
  if (pair.a.rank() != 3) throw ShapeError("pair_to_input: frames must be [H, W, 3]");
  Shape s{1};
  s.insert(s.end(), pair.a.shape().begin(), pair.a.shape().end());
  Shape sb{1};
  sb.insert(sb.end(), pair.b.shape().begin(), pair.b.shape().end());
  return pair_to_input(reshape(pair.a, s), reshape(pair.b, sb), {pair.dt});
}

Discriminator Discriminator::create(std::size_t in_channels,
                                    const std::vector<std::size_t>& channels, double slope,
                                    Rng& rng) {
  if (channels.empty()) throw ShapeError("Discriminator: needs at least one conv layer");
  Discriminator d;
  d.slope_ = slope;
  std::size_t in = in_channels;
  for (std::size_t c : channels) {
    d.convs_.push_back(Conv2d::create(in, c, 3, 2, 1, rng));
    in = c;
  }
  d.head_ = Linear::create(in, 1, rng);
  return d;
}

Tensor Discriminator::operator()(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(3) != in_channels()) {
    throw ShapeError("Discriminator: input " + shape_str(x.shape()) + " but expects " +
                     std::to_string(in_channels()) + " channels");
  }
  Tensor h = x;
  for (const auto& conv : convs_) h = leaky_relu(conv(h), slope_);
  const Tensor pooled = mean(h, {1, 2});  // [B, C]
  return reshape(head_(pooled), {x.dim(0)});
}

void Discriminator::collect(ParamList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) convs_[i].collect(out, prefix + ".conv" + std::to_string(i));
  head_.collect(out, prefix + ".head");
}

AugmentPolicy AugmentPolicy::parse(const std::string& text, double brightness_range) {
  AugmentPolicy p;
  p.brightness_range = brightness_range;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "flip") {
      p.flip = true;
    } else if (item == "brightness") {
      p.brightness = true;
    } else if (item != "none" && !item.empty()) {
      throw ConfigError("unknown augmentation '" + item + "' (expected flip, brightness or none)");
    }
  }
  return p;
}

AugmentParams AugmentParams::identity(std::size_t batch) {
  AugmentParams a;
  a.flip.assign(batch, false);
  a.shift.assign(batch, {0.0, 0.0, 0.0});
  return a;
}

AugmentParams AugmentParams::draw(std::size_t batch, const AugmentPolicy& policy, Rng& rng) {
  AugmentParams a = identity(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    if (policy.flip) a.flip[i] = rng.bernoulli(0.5);
    if (policy.brightness) {
      for (auto& s : a.shift[i]) s = rng.uniform(-policy.brightness_range, policy.brightness_range);
    }
  }
  return a;
}

Tensor AugmentParams::apply(const Tensor& frames) const {
  if (frames.rank() != 4 || frames.dim(3) != 3 || frames.dim(0) != flip.size()) {
    throw ShapeError("augment: frames " + shape_str(frames.shape()) + " vs " +
                     std::to_string(flip.size()) + " draws");
  }
  Tensor out = frames;
  bool any_flip = false;
  for (bool f : flip) any_flip = any_flip || f;
  if (any_flip) out = flip_width(out, flip);
  bool any_shift = false;
  std::vector<double> s;
  for (const auto& row : shift) {
    for (double v : row) {
      any_shift = any_shift || v != 0.0;
      s.push_back(v);
    }
  }
  if (any_shift) out = add(out, Tensor::constant({flip.size(), 1, 1, 3}, std::move(s)));
  return out;
}

}  // namespace fourfield
