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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fourfield/grad_check.hpp"
#include "fourfield/latents.hpp"

namespace fourfield {
namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.content_dim = 8;
  c.motion_dim = 8;
  c.style_dim = 8;
  c.mapping_layers = 8;
  c.motion_hidden = 8;
  c.motion_out = 6;
  return c;
}

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<Tensor> leaves_of(const ParamList& params) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

TEST(UnitSphere, NormAndDeterminism) {
  Rng a(42), b(42);
  for (int i = 0; i < 50; ++i) {
    const auto u = sample_unit_sphere(1 + static_cast<std::size_t>(i), a);
    EXPECT_NEAR(norm(u), 1.0, 1e-9);
    EXPECT_EQ(u, sample_unit_sphere(1 + static_cast<std::size_t>(i), b));
  }
  EXPECT_THROW(sample_unit_sphere(0, a), DomainError);
}

TEST(UnitSphere, MonteCarloMeanNearZero) {
  Rng rng(7);
  std::vector<double> mean(8, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto u = sample_unit_sphere(8, rng);
    for (std::size_t k = 0; k < 8; ++k) mean[k] += u[k] / n;
  }
  for (double m : mean) EXPECT_LT(std::abs(m), 0.02);
}

TEST(UnitSphere, LerpRenormalize) {
  const auto v = lerp_renormalize({1, 0}, {0, 1}, 0.5);
  EXPECT_NEAR(v[0], std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(norm(v), 1.0, 1e-12);
  EXPECT_THROW(lerp_renormalize({1, 0}, {-1, 0}, 0.5), DomainError);
}

TEST(Mapping, DeterministicAndShaped) {
  Rng rng(1);
  const auto cfg = small_config();
  const auto net = MappingNetwork::create(cfg, rng);
  EXPECT_EQ(net.layers().size(), 8u);
  const Tensor z = stack_rows({sample_unit_sphere(8, rng), sample_unit_sphere(8, rng)});
  const Tensor w1 = net(z);
  EXPECT_EQ(w1.shape(), (Shape{2, 8}));
  EXPECT_TRUE(same_values(w1, net(z)));
  EXPECT_THROW(net(Tensor::zeros({2, 7})), ShapeError);
}

TEST(Mapping, PaperDimensions) {
  const auto paper = TrainConfig::paper_scale();
  EXPECT_EQ(paper.model.content_dim, 512u);
  EXPECT_EQ(paper.model.style_dim, 512u);
  EXPECT_EQ(paper.model.motion_dim, 512u);
  EXPECT_EQ(paper.model.motion_hidden, 512u);
  EXPECT_EQ(paper.model.motion_out, 128u);
  EXPECT_EQ(paper.model.mapping_layers, 8u);
}

TEST(Mapping, GradCheckAllWeights) {
  Rng rng(2);
  const auto cfg = small_config();
  const auto net = MappingNetwork::create(cfg, rng);
  const Tensor z = stack_rows({sample_unit_sphere(8, rng)});
  ParamList params;
  net.collect(params, "map");
  EXPECT_EQ(params.size(), 16u);
  auto leaves = leaves_of(params);
  const auto r = grad_check([&] { return sum_all(net(z)); }, leaves);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Motion, ZeroTimeIgnoresMotionCode) {
  Rng rng(3);
  const auto cfg = small_config();
  const auto net = MotionGenerator::create(cfg, rng);
  const Tensor ref = net(stack_rows({sample_unit_sphere(8, rng)}), {0.0});
  for (int i = 0; i < 100; ++i) {
    EXPECT_TRUE(same_values(net(stack_rows({sample_unit_sphere(8, rng)}), {0.0}), ref));
  }
}

TEST(Motion, GradCheckWrtCode) {
  Rng rng(4);
  const auto cfg = small_config();
  const auto net = MotionGenerator::create(cfg, rng);
  const auto m = sample_unit_sphere(8, rng);
  const auto r = grad_check(
      [&](const Tensor& x) { return sum_all(net(x, {0.5})); }, Tensor::leaf({1, 8}, m, true));
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Motion, RejectsTimeOutsideUnitInterval) {
  Rng rng(5);
  const auto net = MotionGenerator::create(small_config(), rng);
  const Tensor m = stack_rows({sample_unit_sphere(8, rng)});
  EXPECT_THROW(net(m, {1.5}), DomainError);
  EXPECT_THROW(net(m, {-0.1}), DomainError);
  EXPECT_THROW(net(m, {0.1, 0.2}), ShapeError);
}

TEST(Motion, ModesShareOutputDimension) {
  for (auto mode : {MotionMode::Multiply, MotionMode::Concat, MotionMode::Positional}) {
    Rng rng(6);
    auto cfg = small_config();
    cfg.motion_mode = mode;
    const auto net = MotionGenerator::create(cfg, rng);
    const Tensor m = stack_rows({sample_unit_sphere(8, rng), sample_unit_sphere(8, rng)});
    const Tensor n = net(m, {0.25, 0.75});
    EXPECT_EQ(n.shape(), (Shape{2, 6})) << to_string(mode);
    EXPECT_TRUE(same_values(n, net.evaluate(m, {0.25, 0.75}, mode)));
  }
  EXPECT_THROW(parse_motion_mode("sideways"), ConfigError);
}

TEST(Motion, ConcatAtPaperDimensions) {
  Rng rng(7);
  auto cfg = TrainConfig::paper_scale().model;
  cfg.motion_mode = MotionMode::Concat;
  const auto net = MotionGenerator::create(cfg, rng);
  EXPECT_EQ(net(stack_rows({sample_unit_sphere(512, rng)}), {0.3}).shape(), (Shape{1, 128}));
}

TEST(Motion, ContinuousInTime) {
  Rng rng(8);
  const auto net = MotionGenerator::create(small_config(), rng);
  const Tensor m = stack_rows({sample_unit_sphere(8, rng)});
  std::vector<double> steps;
  Tensor prev = net(m, {0.0});
  for (int i = 1; i <= 200; ++i) {
    const Tensor cur = net(m, {i / 200.0});
    double d = 0;
    for (std::size_t k = 0; k < cur.numel(); ++k) d = std::max(d, std::abs(cur.values()[k] - prev.values()[k]));
    steps.push_back(d);
    prev = cur;
  }
  auto sorted = steps;
  std::nth_element(sorted.begin(), sorted.begin() + 100, sorted.end());
  const double median = sorted[100];
  for (double d : steps) EXPECT_LE(d, 10 * median + 1e-12);
}

TEST(Latents, CodesAffectOnlyTheirNetwork) {
  Rng rng(9);
  const auto cfg = small_config();
  const auto map = MappingNetwork::create(cfg, rng);
  const auto motion = MotionGenerator::create(cfg, rng);
  const auto a = sample_latents(cfg, rng);
  const auto b = sample_latents(cfg, rng);
  const Tensor wa = map(stack_rows({a.z}));
  const Tensor na = motion(stack_rows({a.m}), {0.5});
  // Swapping m leaves w untouched and moves n.
  EXPECT_TRUE(same_values(map(stack_rows({a.z})), wa));
  EXPECT_FALSE(same_values(motion(stack_rows({b.m}), {0.5}), na));
  // Swapping z moves w and leaves n untouched.
  EXPECT_FALSE(same_values(map(stack_rows({b.z})), wa));
  EXPECT_TRUE(same_values(motion(stack_rows({a.m}), {0.5}), na));
}

}  // namespace
}  // namespace fourfield
