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

#include "fourfield/optimizer.hpp"

#include <cmath>
#include <map>

#include "fourfield/error.hpp"

namespace fourfield {

void Adam::add_group(const ParamList& params, double lr_scale) {
  for (const auto& [name, p] : params) {
    if (!p.is_leaf()) throw ShapeError("Adam: parameter " + name + " is not a leaf");
    slots_.push_back({name, p, lr_scale, std::vector<double>(p.numel(), 0.0),
                      std::vector<double>(p.numel(), 0.0)});
  }
}

void Adam::step(const GradientMap& grads) {
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(hyper_.beta1, t);
  const double c2 = 1.0 - std::pow(hyper_.beta2, t);
  for (auto& s : slots_) {
    const Tensor& g = grads.at(s.param);
    if (g.shape() != s.param.shape()) {
      throw ShapeError("Adam: gradient " + shape_str(g.shape()) + " for " + s.name + " " +
                       shape_str(s.param.shape()));
    }
    const auto gv = g.values();
    auto pv = s.param.leaf_values();
    const double lr = hyper_.lr * s.lr_scale;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      s.m[i] = hyper_.beta1 * s.m[i] + (1.0 - hyper_.beta1) * gv[i];
      s.v[i] = hyper_.beta2 * s.v[i] + (1.0 - hyper_.beta2) * gv[i] * gv[i];
      const double mhat = s.m[i] / c1;
      const double vhat = s.v[i] / c2;
      pv[i] -= lr * mhat / (std::sqrt(vhat) + hyper_.eps);
    }
  }
}

std::vector<Tensor> Adam::params() const {
  std::vector<Tensor> out;
  out.reserve(slots_.size());
  for (const auto& s : slots_) out.push_back(s.param);
  return out;
}

ParamList Adam::state(const std::string& prefix) const {
  ParamList out;
  out.emplace_back(prefix + ".step", Tensor::constant({1}, {static_cast<double>(step_)}));
  for (const auto& s : slots_) {
    out.emplace_back(prefix + "." + s.name + ".m", Tensor::constant(s.param.shape(), s.m));
    out.emplace_back(prefix + "." + s.name + ".v", Tensor::constant(s.param.shape(), s.v));
  }
  return out;
}

void Adam::load_state(const ParamList& state, const std::string& prefix) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : state) by_name[name] = &t;
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor& {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointShapeMismatch("missing optimizer tensor " + name);
    if (it->second->shape() != shape) {
      throw CheckpointShapeMismatch(name + ": stored " + shape_str(it->second->shape()) +
                                    ", expected " + shape_str(shape));
    }
    return *it->second;
  };
  const double steps = fetch(prefix + ".step", {1}).item();
  for (auto& s : slots_) {
    const auto m = fetch(prefix + "." + s.name + ".m", s.param.shape()).values();
    const auto v = fetch(prefix + "." + s.name + ".v", s.param.shape()).values();
    s.m.assign(m.begin(), m.end());
    s.v.assign(v.begin(), v.end());
  }
  step_ = static_cast<std::uint64_t>(steps);
}

}  // namespace fourfield
