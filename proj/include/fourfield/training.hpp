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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fourfield/config.hpp"
#include "fourfield/data.hpp"
#include "fourfield/discriminators.hpp"
#include "fourfield/optimizer.hpp"
#include "fourfield/render.hpp"
#include "fourfield/rng.hpp"

namespace fourfield {

/// Non-saturating discriminator loss: mean softplus(-real) + mean softplus(fake).
Tensor adv_loss_d(const Tensor& real_scores, const Tensor& fake_scores);
/// Non-saturating generator loss: mean softplus(-fake).
Tensor adv_loss_g(const Tensor& fake_scores);

using ScoreFn = std::function<Tensor(const Tensor&)>;

/// 0.5 * mean over the batch of |d score / d input|^2, differentiable with
/// respect to the discriminator weights. `real` must be plain data (a
/// tensor that does not itself require gradients).
Tensor r1_penalty(const ScoreFn& score, const Tensor& real);

/// Squared RGB difference between the upsampled output and the direct
/// feature-to-RGB map at the matching low-resolution pixel, summed over
/// channels and averaged over `samples` random output pixels.
Tensor nerf_path_reg(const Upsampler& up, const Tensor& features, const Tensor& rgb,
                     std::size_t samples, Rng& rng);

enum class StepKind { Video, Image };
std::string to_string(StepKind kind);

struct StepMetrics {
  std::uint64_t step = 0;
  StepKind kind = StepKind::Video;
  std::optional<double> d_time;
  std::optional<double> d_image;
  std::optional<double> g_time;
  std::optional<double> g_image;
  std::optional<double> r1;
  std::optional<double> path;
  /// Weight the R1 term carried this step (lambda_r1 * interval, or 0).
  double r1_weight = 0.0;
  double lambda_path = 0.0;
  double total = 0.0;
  std::optional<double> d_time_accuracy;
  std::optional<double> d_image_accuracy;
  double wall_ms = 0.0;

  /// Weighted sum of the components that are present.
  double weighted_sum() const;
  /// Equality of everything except the wall-clock time.
  bool same_values(const StepMetrics& other) const;
};

/// One line of `key=value` fields; absent terms are printed as "-".
std::string format_metrics(const StepMetrics& m);

class TrainState {
 public:
  TrainConfig cfg;
  Generator gen;
  Discriminator d_time;
  Discriminator d_image;
  Adam opt_g;
  Adam opt_d;
  Rng rng;
  std::uint64_t step = 0;

  static TrainState create(const TrainConfig& cfg);

  TrainState(TrainState&&) = default;
  TrainState& operator=(TrainState&&) = default;
  TrainState(const TrainState&) = delete;
  TrainState& operator=(const TrainState&) = delete;

  ParamList generator_params() const;
  ParamList discriminator_params() const;
  /// Every weight and optimizer tensor, named, in a fixed order.
  ParamList tensors() const;

 private:
  TrainState(TrainConfig c, Generator g, Discriminator dt, Discriminator di, Rng r);
};

/// Latents, cameras and times for one generated batch.
struct FakeSpec {
  StepKind kind = StepKind::Video;
  std::vector<LatentPair> latents;
  std::vector<CameraPose> poses;
  std::vector<double> t1;
  std::vector<double> t2;  // empty for image batches
};

FakeSpec sample_fake_spec(const TrainConfig& cfg, StepKind kind, Rng& rng);

struct FakeBatch {
  RenderOutput render;
  Tensor a;  // [B, H, W, 3], frames at t1
  Tensor b;  // [B, H, W, 3], frames at t2 (video only)
  std::vector<double> dt;
};

FakeBatch render_fakes(const TrainState& state, const FakeSpec& spec, Rng* jitter);

struct GeneratorLoss {
  Tensor total;
  std::optional<Tensor> time;
  std::optional<Tensor> image;
  Tensor path;
};

GeneratorLoss generator_loss(const TrainState& state, const FakeBatch& fake,
                             const AugmentParams& aug, Rng& rng);

/// One discriminator update followed by one generator update.
StepMetrics train_step(TrainState& state, const Corpus& corpus, StepKind kind = StepKind::Video);

using MetricsCallback = std::function<void(const StepMetrics&)>;

std::vector<StepMetrics> train(TrainState& state, const Corpus& corpus, std::size_t steps,
                               const MetricsCallback& on_step = {});
/// Image-only training with the motion vector forced to zero.
std::vector<StepMetrics> pretrain_static(TrainState& state, const Corpus& images,
                                         std::size_t steps, const MetricsCallback& on_step = {});
/// Interleaves image steps at cfg.joint_ratio with video steps.
std::vector<StepMetrics> train_joint(TrainState& state, const Corpus& videos, const Corpus& images,
                                     std::size_t steps, const MetricsCallback& on_step = {});
/// Step s is an image step iff floor((s + 1) r) > floor(s r).
bool is_image_step(std::uint64_t step, double ratio);

/// Versioned binary container; see save_checkpoint for the layout.
std::string serialize_checkpoint(const TrainState& state);
TrainState deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

}  // namespace fourfield
