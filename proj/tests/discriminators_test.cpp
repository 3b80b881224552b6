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

#include "fourfield/discriminators.hpp"
#include "fourfield/grad_check.hpp"
#include "fourfield/optimizer.hpp"

namespace fourfield {
namespace {

Tensor random_leaf(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0, bool grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::leaf(std::move(shape), std::move(v), grad);
}

bool same_values(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

std::vector<Tensor> leaves_of(const ParamList& params) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

TEST(PairInput, ChannelsAndDtPlane) {
  Rng rng(1);
  const Tensor a = random_leaf({2, 4, 5, 3}, rng), b = random_leaf({2, 4, 5, 3}, rng);
  const Tensor x = pair_to_input(a, b, {0.25, 0.5});
  ASSERT_EQ(x.shape(), (Shape{2, 4, 5, 7}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 5; ++j) {
        EXPECT_EQ(x.at({n, i, j, 6}), n == 0 ? 0.25 : 0.5);
        for (std::size_t c = 0; c < 3; ++c) {
          EXPECT_EQ(x.at({n, i, j, c}), a.at({n, i, j, c}));
          EXPECT_EQ(x.at({n, i, j, 3 + c}), b.at({n, i, j, c}));
        }
      }
}

TEST(PairInput, Errors) {
  Rng rng(2);
  const Tensor a = random_leaf({1, 4, 4, 3}, rng);
  EXPECT_THROW(pair_to_input(a, a, {0.0}), DomainError);
  EXPECT_THROW(pair_to_input(a, a, {-0.3}), DomainError);
  EXPECT_THROW(pair_to_input(a, random_leaf({1, 4, 5, 3}, rng), {0.5}), ShapeError);
  EXPECT_THROW(pair_to_input(a, a, {0.5, 0.5}), ShapeError);
  const FramePair p{random_leaf({4, 4, 3}, rng), random_leaf({4, 4, 3}, rng), 0.2};
  EXPECT_EQ(pair_to_input(p).shape(), (Shape{1, 4, 4, 7}));
}

TEST(Discriminator, DeterministicAndShaped) {
  Rng rng(3);
  const auto d = Discriminator::create(7, {16, 32, 64}, 0.2, rng);
  const Tensor x = random_leaf({3, 16, 16, 7}, rng);
  const Tensor s = d(x);
  EXPECT_EQ(s.shape(), (Shape{3}));
  EXPECT_TRUE(same_values(s, d(x)));
  EXPECT_THROW(d(random_leaf({1, 16, 16, 3}, rng)), ShapeError);
}

TEST(Discriminator, GradCheckWrtPixels) {
  for (std::size_t channels : {7u, 3u}) {
    Rng rng(4);
    const auto d = Discriminator::create(channels, {4, 8, 8}, 0.2, rng);
    const Tensor x = random_leaf({1, 8, 8, channels}, rng, 0, 1, true);
    const auto r = grad_check([&](const Tensor& in) { return sum_all(d(in)); }, x);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
    EXPECT_GT(r.checked, 8u * 8u * channels / 2);
  }
}

TEST(Discriminator, GradCheckWrtWeights) {
  Rng rng(5);
  const auto d = Discriminator::create(3, {4, 4}, 0.2, rng);
  const Tensor x = random_leaf({2, 8, 8, 3}, rng);
  ParamList params;
  d.collect(params, "d");
  auto leaves = leaves_of(params);
  const auto r = grad_check([&] { return sum_all(d(x)); }, leaves);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Discriminator, DtOnlyThroughItsChannel) {
  Rng rng(6);
  const auto d = Discriminator::create(7, {8, 8}, 0.2, rng);
  const Tensor a = random_leaf({1, 8, 8, 3}, rng), b = random_leaf({1, 8, 8, 3}, rng);
  std::vector<double> mask(7, 1.0);
  mask[6] = 0.0;
  const Tensor keep = Tensor::constant({7}, mask);
  const Tensor s1 = d(mul(pair_to_input(a, b, {0.1}), keep));
  const Tensor s2 = d(mul(pair_to_input(a, b, {0.9}), keep));
  EXPECT_TRUE(same_values(s1, s2));
  EXPECT_FALSE(same_values(d(pair_to_input(a, b, {0.1})), d(pair_to_input(a, b, {0.9}))));
}

TEST(Augment, NoneFlipAndConsistency) {
  Rng rng(7);
  const Tensor x = random_leaf({4, 5, 6, 3}, rng);
  const auto none = AugmentPolicy::parse("none", 0.1);
  EXPECT_FALSE(none.flip || none.brightness);
  EXPECT_TRUE(same_values(AugmentParams::draw(4, none, rng).apply(x), x));

  AugmentParams flip = AugmentParams::identity(4);
  flip.flip = {true, false, true, true};
  EXPECT_TRUE(same_values(flip.apply(flip.apply(x)), x));
  EXPECT_FALSE(same_values(flip.apply(x), x));

  const auto policy = AugmentPolicy::parse("flip,brightness", 0.1);
  const auto params = AugmentParams::draw(4, policy, rng);
  for (const auto& s : params.shift)
    for (double v : s) EXPECT_LE(std::abs(v), 0.1);
  // One draw transforms any two batches identically.
  const Tensor y = random_leaf({4, 5, 6, 3}, rng);
  AugmentParams shift_only = params;
  shift_only.flip.assign(4, false);
  const Tensor sx = sub(shift_only.apply(x), x), sy = sub(shift_only.apply(y), y);
  for (std::size_t i = 0; i < sx.numel(); ++i) EXPECT_NEAR(sx.values()[i], sy.values()[i], 1e-15);
  EXPECT_THROW(AugmentPolicy::parse("flip,cutout", 0.1), ConfigError);
}

TEST(Augment, GradientFlowsThroughBrightness) {
  Rng rng(8);
  auto params = AugmentParams::draw(2, AugmentPolicy::parse("flip,brightness", 0.1), rng);
  params.flip = {true, false};
  const Tensor x = random_leaf({2, 3, 3, 3}, rng, 0, 1, true);
  const Tensor wts = random_leaf({2, 3, 3, 3}, rng, -1, 1);
  const auto r = grad_check([&](const Tensor& in) { return sum_all(square(mul(params.apply(in), wts))); }, x);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

// Pairs whose brightness rises with time are real; the same pairs with the
// frames swapped are fake. Only the time channel plus frame order tells them apart.
TEST(Discriminator, LearnsToySeparableTask) {
  Rng rng(9);
  const auto d = Discriminator::create(7, {8, 16}, 0.2, rng);
  ParamList params;
  d.collect(params, "d");
  Adam opt({0.01, 0.0, 0.99, 1e-8});
  opt.add_group(params, 1.0);
  const auto leaves = leaves_of(params);

  auto batch = [&](std::size_t n, bool real) {
    std::vector<double> a, b, dt;
    for (std::size_t k = 0; k < n; ++k) {
      const double c = rng.uniform(0.1, 0.4), v = rng.uniform(0.3, 0.6);
      const double t1 = rng.uniform(0.0, 0.5), t2 = t1 + rng.uniform(0.2, 0.5);
      const double lo = c + v * t1, hi = c + v * t2;
      a.insert(a.end(), 8 * 8 * 3, real ? lo : hi);
      b.insert(b.end(), 8 * 8 * 3, real ? hi : lo);
      dt.push_back(t2 - t1);
    }
    return pair_to_input(Tensor::constant({n, 8, 8, 3}, a), Tensor::constant({n, 8, 8, 3}, b), dt);
  };
  for (int step = 0; step < 300; ++step) {
    const Tensor real = batch(8, true), fake = batch(8, false);
    const Tensor loss = add(mean_all(softplus(neg(d(real)))), mean_all(softplus(d(fake))));
    opt.step(backward(loss, leaves));
  }
  NoGradGuard ng;
  const Tensor sr = d(batch(200, true)), sf = d(batch(200, false));
  std::size_t hits = 0;
  for (double v : sr.values()) hits += v > 0;
  for (double v : sf.values()) hits += v < 0;
  EXPECT_GT(hits / 400.0, 0.9);
}

}  // namespace
}  // namespace fourfield
