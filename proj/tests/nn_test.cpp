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

#include <cmath>

#include "fourfield/grad_check.hpp"
#include "fourfield/nn.hpp"
#include "fourfield/rng.hpp"

namespace fourfield {
namespace {

Tensor random_leaf(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::leaf(std::move(shape), std::move(v), grad);
}

std::vector<Tensor> leaves_of(const ParamList& params) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

TEST(Linear, MatchesHandComputation) {
  Rng rng(1);
  auto l = Linear::create(3, 2, rng);
  const Tensor x = random_leaf({4, 3}, rng, -1, 1, false);
  const Tensor y = l(x);
  ASSERT_EQ(y.shape(), (Shape{4, 2}));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = l.bias.at({j});
      for (std::size_t k = 0; k < 3; ++k) acc += x.at({i, k}) * l.weight.at({k, j});
      EXPECT_NEAR(y.at({i, j}), acc, 1e-14);
    }
  EXPECT_THROW(l(Tensor::zeros({4, 5})), ShapeError);
}

// Builds a layer whose weight columns (one per output unit) have unit norm
// and whose style affine always yields s = 1.
ModulatedLinear unit_layer(std::size_t in, std::size_t out, Rng& rng) {
  auto l = ModulatedLinear::create(in, out, 5, rng);
  std::vector<double> w(in * out);
  for (auto& v : w) v = rng.normal();
  for (std::size_t j = 0; j < out; ++j) {
    double n2 = 0;
    for (std::size_t i = 0; i < in; ++i) n2 += w[i * out + j] * w[i * out + j];
    for (std::size_t i = 0; i < in; ++i) w[i * out + j] /= std::sqrt(n2);
  }
  l.weight = Tensor::leaf({in, out}, w);
  l.bias = random_leaf({out}, rng, -1, 1, false);
  l.style_weight = Tensor::zeros({5, in});
  return l;
}

TEST(ModulatedLinear, IdentityForUnitScalesAndNormalisedWeights) {
  Rng rng(2);
  const auto l = unit_layer(6, 4, rng);
  const Tensor w = random_leaf({3, 5}, rng, -1, 1, false);
  const Tensor x = random_leaf({3, 7, 6}, rng, -1, 1, false);
  const Tensor plain = add(matmul(x, l.weight), l.bias);

  const Tensor exact = l(w, x, 0.0);
  for (std::size_t i = 0; i < plain.numel(); ++i) EXPECT_NEAR(exact.values()[i], plain.values()[i], 1e-12);

  // With eps = 1e-8 the demodulation is off by a relative 5e-9, so keep
  // inputs small enough that the absolute error stays under 1e-9.
  const Tensor small = scale(x, 0.1);
  const Tensor got = l(w, small, 1e-8);
  const Tensor want = add(matmul(small, l.weight), l.bias);
  for (std::size_t i = 0; i < want.numel(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-9);
}

TEST(ModulatedLinear, ScaleInvariance) {
  Rng rng(3);
  const auto l = ModulatedLinear::create(8, 5, 6, rng);
  const Tensor w = random_leaf({2, 6}, rng, -1, 1, false);
  const Tensor x = random_leaf({2, 4, 8}, rng, -1, 1, false);
  const Tensor s = l.scales(w);
  // eps dominates once c shrinks the row norms towards sqrt(eps), so the
  // small constants are only exact without it.
  for (double eps : {0.0, 1e-8}) {
    const Tensor base = modulated_apply(l.weight, l.bias, s, x, eps);
    for (double c : {0.01, 0.5, 3.0, 100.0}) {
      if (eps > 0 && c < 0.5) continue;
      const Tensor y = modulated_apply(l.weight, l.bias, scale(s, c), x, eps);
      for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y.values()[i], base.values()[i], 1e-6);
    }
  }
}

TEST(ModulatedLinear, TwoStackedLayersGradCheck) {
  Rng rng(4);
  const auto l0 = ModulatedLinear::create(5, 6, 4, rng);
  const auto l1 = ModulatedLinear::create(6, 3, 4, rng);
  Tensor w = random_leaf({2, 4}, rng);
  Tensor x = random_leaf({2, 3, 5}, rng);
  ParamList params;
  l0.collect(params, "l0");
  l1.collect(params, "l1");
  auto leaves = leaves_of(params);
  leaves.push_back(w);
  leaves.push_back(x);
  const auto r = grad_check(
      [&] { return sum_all(square(l1(w, leaky_relu(l0(w, x, 1e-8), 0.2), 1e-8))); }, leaves);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  EXPECT_GT(r.checked, 100u);
}

TEST(ModulatedLinear, ShapeErrors) {
  Rng rng(5);
  const auto l = ModulatedLinear::create(5, 6, 4, rng);
  EXPECT_THROW(l(Tensor::zeros({2, 3}), Tensor::zeros({2, 5}), 1e-8), ShapeError);
  EXPECT_THROW(l(Tensor::zeros({2, 4}), Tensor::zeros({2, 6}), 1e-8), ShapeError);
  EXPECT_THROW(l(Tensor::zeros({2, 4}), Tensor::zeros({3, 5}), 1e-8), ShapeError);
}

// Direct loop convolution used as the reference.
std::vector<double> naive_conv(const Tensor& x, const Conv2d& c) {
  const std::size_t b = x.dim(0), h = x.dim(1), w = x.dim(2), ci = x.dim(3);
  const std::size_t co = c.out_channels(), k = c.kernel;
  const std::size_t oh = (h + 2 * c.pad - k) / c.stride + 1, ow = (w + 2 * c.pad - k) / c.stride + 1;
  std::vector<double> out;
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xx = 0; xx < ow; ++xx)
        for (std::size_t o = 0; o < co; ++o) {
          double acc = c.bias.at({o});
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long sy = static_cast<long>(y * c.stride + ky) - static_cast<long>(c.pad);
              const long sx = static_cast<long>(xx * c.stride + kx) - static_cast<long>(c.pad);
              if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) continue;
              for (std::size_t cc = 0; cc < ci; ++cc)
                acc += x.at({bi, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), cc}) *
                       c.weight.at({(ky * k + kx) * ci + cc, o});
            }
          out.push_back(acc);
        }
  return out;
}

TEST(Conv2d, MatchesLoopReference) {
  Rng rng(6);
  for (std::size_t stride : {1u, 2u}) {
    auto c = Conv2d::create(3, 4, 3, stride, 1, rng);
    c.bias = random_leaf({4}, rng, -1, 1, false);
    const Tensor x = random_leaf({2, 5, 6, 3}, rng, -1, 1, false);
    const Tensor y = c(x);
    const auto ref = naive_conv(x, c);
    ASSERT_EQ(y.numel(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.values()[i], ref[i], 1e-13);
  }
}

TEST(Conv2d, GradCheck) {
  Rng rng(7);
  const auto c = Conv2d::create(2, 3, 3, 2, 1, rng);
  Tensor x = random_leaf({1, 4, 4, 2}, rng);
  std::vector<Tensor> leaves{c.weight, c.bias, x};
  const auto r = grad_check([&] { return sum_all(square(c(x))); }, leaves);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(Resample, NearestUpsampleEdgePadAndFlip) {
  const Tensor x = Tensor::leaf({1, 2, 2, 1}, {1, 2, 3, 4});
  const Tensor up = upsample_nearest2x(x);
  ASSERT_EQ(up.shape(), (Shape{1, 4, 4, 1}));
  const std::vector<double> want{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  EXPECT_EQ(std::vector<double>(up.values().begin(), up.values().end()), want);

  const Tensor padded = pad_edge(x, 1);
  ASSERT_EQ(padded.shape(), (Shape{1, 4, 4, 1}));
  EXPECT_EQ(std::vector<double>(padded.values().begin(), padded.values().end()), want);

  const Tensor f = flip_width(Tensor::leaf({2, 1, 2, 1}, {1, 2, 3, 4}), {true, false});
  EXPECT_EQ(std::vector<double>(f.values().begin(), f.values().end()),
            (std::vector<double>{2, 1, 3, 4}));
}

}  // namespace
}  // namespace fourfield
