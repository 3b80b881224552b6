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

#include <cstdint>
#include <string>
#include <vector>

#include "fourfield/nn.hpp"
#include "fourfield/tensor.hpp"

namespace fourfield {

struct AdamHyper {
  double lr = 0.0025;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Bias-corrected Adam over named parameter groups, each with its own
/// learning-rate multiplier.
class Adam {
 public:
  explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}

  void add_group(const ParamList& params, double lr_scale);
  /// Applies one update using grads.at(param) for every registered param.
  void step(const GradientMap& grads);

  const AdamHyper& hyper() const { return hyper_; }
  std::uint64_t steps() const { return step_; }
  std::vector<Tensor> params() const;
  std::size_t size() const { return slots_.size(); }

  /// Moments as named tensors ("<prefix>.<param>.m" / ".v") plus a
  /// one-element step counter, for checkpoints.
  ParamList state(const std::string& prefix) const;
  void load_state(const ParamList& state, const std::string& prefix);
  /// First moment of param i, exposed for tests.
  const std::vector<double>& first_moment(std::size_t i) const { return slots_.at(i).m; }
  const std::vector<double>& second_moment(std::size_t i) const { return slots_.at(i).v; }

 private:
  struct Slot {
    std::string name;
    Tensor param;
    double lr_scale = 1.0;
    std::vector<double> m;
    std::vector<double> v;
  };
  AdamHyper hyper_;
  std::vector<Slot> slots_;
  std::uint64_t step_ = 0;
};

}  // namespace fourfield
