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

#include "fourfield/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <utility>

#include "fourfield/error.hpp"

namespace fourfield {

namespace {

void require_scores(const Tensor& s, const char* what) {
  if (s.rank() != 1 || s.numel() == 0) throw ShapeError(std::string(what) + ": expected a non-empty [B] score vector");
}

// Runs one loss component, naming it in any non-finite failure.
template <class F>
Tensor component(const char* name, F&& f) {
  try {
    Tensor t = f();
    if (!std::isfinite(t.item())) throw NonFiniteError("value is not finite");
    return t;
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(std::string("non-finite value in ") + name + ": " + e.what());
  }
}

double accuracy(const Tensor& real, const Tensor& fake) {
  std::size_t hits = 0;
  for (double v : real.values()) hits += v > 0.0;
  for (double v : fake.values()) hits += v < 0.0;
  return static_cast<double>(hits) / static_cast<double>(real.numel() + fake.numel());
}

std::vector<double> rows_of(const std::vector<LatentPair>& l, bool content) {
  std::vector<double> out;
  for (const auto& p : l) {
    const auto& v = content ? p.z : p.m;
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace

Tensor adv_loss_d(const Tensor& real_scores, const Tensor& fake_scores) {
  require_scores(real_scores, "adv_loss_d");
  require_scores(fake_scores, "adv_loss_d");
  return add(mean_all(softplus(neg(real_scores))), mean_all(softplus(fake_scores)));
}

Tensor adv_loss_g(const Tensor& fake_scores) {
  require_scores(fake_scores, "adv_loss_g");
  return mean_all(softplus(neg(fake_scores)));
}

Tensor r1_penalty(const ScoreFn& score, const Tensor& real) {
  if (real.requires_grad()) {
    throw DomainError("r1_penalty: input must be a real (data) batch, not a generated one");
  }
  if (real.rank() == 0 || real.dim(0) == 0) throw ShapeError("r1_penalty: empty batch");
  GradModeGuard enable(true);
  const Tensor x = Tensor::leaf(real.shape(), {real.values().begin(), real.values().end()}, true);
  const Tensor s = score(x);
  const auto grads = backward(sum_all(s), {x}, true);
  const Tensor& g = grads.at(x);
  return scale(sum_all(square(g)), 0.5 / static_cast<double>(real.dim(0)));
}

Tensor nerf_path_reg(const Upsampler& up, const Tensor& features, const Tensor& rgb,
                     std::size_t samples, Rng& rng) {
  if (samples == 0) throw DomainError("nerf_path_reg: sample count must be >= 1");
  if (features.rank() != 4 || rgb.rank() != 4 || rgb.dim(3) != 3 ||
      rgb.dim(0) != features.dim(0)) {
    throw ShapeError("nerf_path_reg: features " + shape_str(features.shape()) + ", rgb " +
                     shape_str(rgb.shape()));
  }
  const std::size_t b = rgb.dim(0), hh = rgb.dim(1), ww = rgb.dim(2);
  const std::size_t h = features.dim(1), w = features.dim(2);
  if (hh % h != 0 || ww % w != 0 || hh / h != ww / w) {
    throw ShapeError("nerf_path_reg: output is not an integer upscale of the features");
  }
  const std::size_t f = hh / h;
  const Tensor low = up.to_rgb_direct(features);
  auto hi_idx = std::make_shared<std::vector<std::int64_t>>();
  auto lo_idx = std::make_shared<std::vector<std::int64_t>>();
  for (std::size_t k = 0; k < samples; ++k) {
    const std::size_t bi = rng.below(b), y = rng.below(hh), x = rng.below(ww);
    for (std::size_t c = 0; c < 3; ++c) {
      hi_idx->push_back(static_cast<std::int64_t>(((bi * hh + y) * ww + x) * 3 + c));
      lo_idx->push_back(static_cast<std::int64_t>(((bi * h + y / f) * w + x / f) * 3 + c));
    }
  }
  const Tensor diff = sub(gather(rgb, hi_idx, {samples, 3}), gather(low, lo_idx, {samples, 3}));
  return scale(sum_all(square(diff)), 1.0 / static_cast<double>(samples));
}

std::string to_string(StepKind kind) { return kind == StepKind::Video ? "video" : "image"; }

double StepMetrics::weighted_sum() const {
  double s = 0.0;
  if (d_time) s += *d_time;
  if (d_image) s += *d_image;
  if (r1) s += r1_weight * *r1;
  if (g_time) s += *g_time;
  if (g_image) s += *g_image;
  if (path) s += lambda_path * *path;
  return s;
}

bool StepMetrics::same_values(const StepMetrics& o) const {
  return step == o.step && kind == o.kind && d_time == o.d_time && d_image == o.d_image &&
         g_time == o.g_time && g_image == o.g_image && r1 == o.r1 && path == o.path &&
         r1_weight == o.r1_weight && lambda_path == o.lambda_path && total == o.total &&
         d_time_accuracy == o.d_time_accuracy && d_image_accuracy == o.d_image_accuracy;
}

std::string format_metrics(const StepMetrics& m) {
  auto field = [](const char* key, const std::optional<double>& v) {
    char buf[64];
    if (v) {
      std::snprintf(buf, sizeof buf, " %s=%.9g", key, *v);
    } else {
      std::snprintf(buf, sizeof buf, " %s=-", key);
    }
    return std::string(buf);
  };
  std::string out = "step=" + std::to_string(m.step) + " kind=" + to_string(m.kind);
  out += field("L_D_time", m.d_time);
  out += field("L_D_img", m.d_image);
  out += field("L_G_time", m.g_time);
  out += field("L_G_img", m.g_image);
  out += field("R1", m.r1);
  out += field("path_reg", m.path);
  out += field("total", m.total);
  out += field("acc_time", m.d_time_accuracy);
  out += field("acc_img", m.d_image_accuracy);
  char buf[48];
  std::snprintf(buf, sizeof buf, " wall_ms=%.1f", m.wall_ms);
  return out + buf;
}

TrainState::TrainState(TrainConfig c, Generator g, Discriminator dt, Discriminator di, Rng r)
    : cfg(std::move(c)),
      gen(std::move(g)),
      d_time(std::move(dt)),
      d_image(std::move(di)),
      opt_g({cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps}),
      opt_d({cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps}),
      rng(std::move(r)) {}

TrainState TrainState::create(const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Generator gen = Generator::create(cfg.model, cfg.render.upsample, rng);
  const double slope = cfg.model.lrelu_slope;
  Discriminator dt = Discriminator::create(7, cfg.model.disc_channels, slope, rng);
  Discriminator di = Discriminator::create(3, cfg.model.disc_channels, slope, rng);
  TrainState s(cfg, std::move(gen), std::move(dt), std::move(di), std::move(rng));
  s.opt_g.add_group(s.gen.mapping_params("gen"), cfg.mapping_lr_scale);
  s.opt_g.add_group(s.gen.motion_params("gen"), cfg.motion_lr_scale);
  s.opt_g.add_group(s.gen.synthesis_params("gen"), 1.0);
  s.opt_d.add_group(s.discriminator_params(), 1.0);
  return s;
}

ParamList TrainState::generator_params() const {
  ParamList out;
  gen.collect(out, "gen");
  return out;
}

ParamList TrainState::discriminator_params() const {
  ParamList out;
  d_time.collect(out, "d_time");
  d_image.collect(out, "d_image");
  return out;
}

ParamList TrainState::tensors() const {
  ParamList out = generator_params();
  const auto d = discriminator_params();
  out.insert(out.end(), d.begin(), d.end());
  for (const auto& part : {opt_g.state("opt_g"), opt_d.state("opt_d")}) {
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

FakeSpec sample_fake_spec(const TrainConfig& cfg, StepKind kind, Rng& rng) {
  FakeSpec spec;
  spec.kind = kind;
  for (std::size_t k = 0; k < cfg.batch; ++k) {
    spec.latents.push_back(sample_latents(cfg.model, rng));
    spec.poses.push_back(sample_camera(cfg.render, rng));
    if (kind == StepKind::Video) {
      const auto [i, j] = sample_index_pair(cfg.frames, rng);
      spec.t1.push_back(frame_time(i, cfg.frames));
      spec.t2.push_back(frame_time(j, cfg.frames));
    } else {
      spec.t1.push_back(0.0);
    }
  }
  return spec;
}

FakeBatch render_fakes(const TrainState& state, const FakeSpec& spec, Rng* jitter) {
  const std::size_t b = spec.latents.size();
  const bool video = spec.kind == StepKind::Video;
  RenderRequest req;
  std::vector<double> z = rows_of(spec.latents, true), m = rows_of(spec.latents, false);
  const std::size_t dz = spec.latents.front().z.size(), dm = spec.latents.front().m.size();
  req.poses = spec.poses;
  req.t = spec.t1;
  if (video) {
    z.insert(z.end(), z.begin(), z.end());
    m.insert(m.end(), m.begin(), m.end());
    req.poses.insert(req.poses.end(), spec.poses.begin(), spec.poses.end());
    req.t.insert(req.t.end(), spec.t2.begin(), spec.t2.end());
  }
  const std::size_t n = video ? 2 * b : b;
  req.z = Tensor::constant({n, dz}, std::move(z));
  req.m = Tensor::constant({n, dm}, std::move(m));
  req.static_mode = !video;

  FakeBatch fake;
  fake.render = render_batch(state.gen, req, state.cfg.render, jitter);
  if (video) {
    fake.a = slice_axis(fake.render.rgb, 0, 0, b);
    fake.b = slice_axis(fake.render.rgb, 0, b, 2 * b);
    for (std::size_t k = 0; k < b; ++k) fake.dt.push_back(spec.t2[k] - spec.t1[k]);
  } else {
    fake.a = fake.render.rgb;
  }
  return fake;
}

GeneratorLoss generator_loss(const TrainState& state, const FakeBatch& fake,
                             const AugmentParams& aug, Rng& rng) {
  const auto& cfg = state.cfg;
  const bool video = fake.b.defined();
  GeneratorLoss out;
  Tensor total = Tensor::scalar(0.0);
  if (video) {
    out.time = component("L_G_time", [&] {
      return adv_loss_g(state.d_time(pair_to_input(aug.apply(fake.a), aug.apply(fake.b), fake.dt)));
    });
    total = add(total, *out.time);
  }
  if (cfg.image_disc || !video) {
    out.image = component("L_G_img", [&] {
      const Tensor frames = video ? concat({aug.apply(fake.a), aug.apply(fake.b)}, 0) : aug.apply(fake.a);
      return adv_loss_g(state.d_image(frames));
    });
    total = add(total, *out.image);
  }
  out.path = component("path_reg", [&] {
    return nerf_path_reg(state.gen.up, fake.render.features, fake.render.rgb, cfg.path_samples, rng);
  });
  out.total = add(total, scale(out.path, cfg.lambda_path));
  return out;
}

StepMetrics train_step(TrainState& state, const Corpus& corpus, StepKind kind) {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = state.cfg;
  if (corpus.clips.empty()) throw DomainError("train_step: corpus is empty");
  if (corpus.manifest.height != cfg.render.resolution || corpus.manifest.width != cfg.render.resolution) {
    throw ConfigError("corpus resolution " + std::to_string(corpus.manifest.height) + "x" +
                      std::to_string(corpus.manifest.width) + " differs from render.resolution " +
                      std::to_string(cfg.render.resolution));
  }
  GradModeGuard grad_on(true);
  Rng& rng = state.rng;
  const bool video = kind == StepKind::Video;
  const bool use_image = cfg.image_disc || !video;
  const std::size_t b = cfg.batch;

  StepMetrics m;
  m.step = state.step;
  m.kind = kind;
  m.lambda_path = cfg.lambda_path;

  // Real data, generated data and one shared augmentation draw.
  PairBatch real;
  Tensor real_frames;
  if (video) {
    real = sample_real_pairs(corpus, b, rng);
  } else {
    real_frames = sample_real_frames(corpus, b, rng);
  }
  const FakeSpec spec = sample_fake_spec(cfg, kind, rng);
  FakeBatch fake;
  try {
    fake = render_fakes(state, spec, &rng);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(std::string("non-finite value in generator render: ") + e.what());
  }
  const AugmentParams aug = AugmentParams::draw(b, AugmentPolicy::parse(cfg.aug_policy, cfg.aug_brightness), rng);

  // Discriminator phase on detached fakes.
  {
    Tensor loss = Tensor::scalar(0.0);
    Tensor time_in;
    Tensor image_in;
    if (video) {
      time_in = pair_to_input(aug.apply(real.a), aug.apply(real.b), real.dt);
      const Tensor fake_in = pair_to_input(aug.apply(fake.a.detach()), aug.apply(fake.b.detach()), fake.dt);
      Tensor sr, sf;
      const Tensor l = component("L_D_time", [&] {
        sr = state.d_time(time_in);
        sf = state.d_time(fake_in);
        return adv_loss_d(sr, sf);
      });
      m.d_time = l.item();
      m.d_time_accuracy = accuracy(sr, sf);
      loss = add(loss, l);
    }
    if (use_image) {
      image_in = video ? concat({aug.apply(real.a), aug.apply(real.b)}, 0) : aug.apply(real_frames);
      const Tensor fake_frames = video ? concat({aug.apply(fake.a.detach()), aug.apply(fake.b.detach())}, 0)
                                       : aug.apply(fake.a.detach());
      Tensor sr, sf;
      const Tensor l = component("L_D_img", [&] {
        sr = state.d_image(image_in);
        sf = state.d_image(fake_frames);
        return adv_loss_d(sr, sf);
      });
      m.d_image = l.item();
      m.d_image_accuracy = accuracy(sr, sf);
      loss = add(loss, l);
    }
    const std::size_t k = std::max<std::size_t>(cfg.r1_interval, 1);
    if (cfg.lambda_r1 > 0.0 && state.step % k == 0) {
      const Tensor r1 = component("R1", [&] {
        Tensor r = Tensor::scalar(0.0);
        if (video) r = add(r, r1_penalty(std::cref(state.d_time), time_in.detach()));
        if (use_image) r = add(r, r1_penalty(std::cref(state.d_image), image_in.detach()));
        return r;
      });
      m.r1 = r1.item();
      m.r1_weight = cfg.lambda_r1 * static_cast<double>(k);
      loss = add(loss, scale(r1, m.r1_weight));
    }
    const auto params = state.opt_d.params();
    state.opt_d.step(backward(loss, params));
  }

  // Generator phase against the updated discriminators.
  {
    const GeneratorLoss g = generator_loss(state, fake, aug, rng);
    if (g.time) m.g_time = g.time->item();
    if (g.image) m.g_image = g.image->item();
    m.path = g.path.item();
    const auto params = state.opt_g.params();
    state.opt_g.step(backward(g.total, params));
  }

  m.total = m.weighted_sum();
  ++state.step;
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return m;
}

bool is_image_step(std::uint64_t step, double ratio) {
  if (ratio <= 0.0) return false;
  const double s = static_cast<double>(step);
  return std::floor((s + 1.0) * ratio) > std::floor(s * ratio);
}

std::vector<StepMetrics> train(TrainState& state, const Corpus& corpus, std::size_t steps,
                               const MetricsCallback& on_step) {
  std::vector<StepMetrics> out;
  for (std::size_t i = 0; i < steps; ++i) {
    out.push_back(train_step(state, corpus, StepKind::Video));
    if (on_step) on_step(out.back());
  }
  return out;
}

std::vector<StepMetrics> pretrain_static(TrainState& state, const Corpus& images,
                                         std::size_t steps, const MetricsCallback& on_step) {
  std::vector<StepMetrics> out;
  for (std::size_t i = 0; i < steps; ++i) {
    out.push_back(train_step(state, images, StepKind::Image));
    if (on_step) on_step(out.back());
  }
  return out;
}

std::vector<StepMetrics> train_joint(TrainState& state, const Corpus& videos, const Corpus& images,
                                     std::size_t steps, const MetricsCallback& on_step) {
  std::vector<StepMetrics> out;
  for (std::size_t i = 0; i < steps; ++i) {
    const bool image = is_image_step(state.step, state.cfg.joint_ratio);
    out.push_back(train_step(state, image ? images : videos, image ? StepKind::Image : StepKind::Video));
    if (on_step) on_step(out.back());
  }
  return out;
}

}  // namespace fourfield
