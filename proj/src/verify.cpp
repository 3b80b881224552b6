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

#include "fourfield/verify.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "fourfield/grad_check.hpp"
#include "fourfield/optimizer.hpp"
#include "fourfield/training.hpp"

namespace fourfield {

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

ModelConfig verify_model() {
  ModelConfig c;
  c.content_dim = c.motion_dim = c.style_dim = 6;
  c.mapping_layers = 2;
  c.motion_hidden = 6;
  c.motion_out = 5;
  c.fg_layers = 2;
  c.fg_hidden = 8;
  c.feature_dim = 4;
  c.density_hidden = 4;
  c.bg_layers = 2;
  c.bg_hidden = 4;
  c.pos_bands = 3;
  c.dir_bands = 2;
  c.disc_channels = {4, 4};
  return c;
}

Tensor random_tensor(Shape shape, Rng& rng, double lo, double hi, bool grad) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::leaf(std::move(shape), std::move(v), grad);
}

std::vector<Tensor> leaves_of(const ParamList& params) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

Outcome grad_outcome(const GradCheckResult& r, double tol) {
  return {r.max_rel_error < tol && r.checked > 0,
          "max_rel=" + fmt(r.max_rel_error) + " checked=" + std::to_string(r.checked) +
              " excluded=" + std::to_string(r.excluded)};
}

Outcome check_param_grads(const std::function<Tensor()>& f, const ParamList& params, double tol) {
  auto leaves = leaves_of(params);
  return grad_outcome(grad_check(f, leaves, {1e-4, 12}), tol);
}

Outcome transmittance_closed_form(bool corrupt) {
  const std::vector<RayImage> rays{rays_for_camera(make_pose(0, 0, 18), 2, 2, 0.0, 1.0)};
  SampleSpec spec;
  spec.samples = 256;
  spec.near = 0.0;
  spec.far = 1.0;
  spec.background = false;
  double worst = 0;
  for (double c : {0.5, 2.0, 8.0}) {
    const FieldFn field = [c](const Tensor& pts) {
      return FieldSample{Tensor::full({pts.dim(0), pts.dim(1), 1}, 1.0), Tensor::full({pts.dim(0), pts.dim(1)}, c)};
    };
    const double want = 1.0 - std::exp(-c) + (corrupt ? 0.05 : 0.0);
    const auto r = volume_render(rays, spec, field, nullptr);
    for (double a : r.alpha.values()) worst = std::max(worst, std::abs(a - want));
  }
  return {worst < 1e-3, "max_err=" + fmt(worst)};
}

Outcome conservation(Rng& rng) {
  const std::size_t rays = 10000, s = 12;
  std::vector<double> dens(rays * s), delta(rays * s);
  for (auto& d : dens) d = rng.uniform() < 0.3 ? 0.0 : -std::log(1.0 - rng.uniform()) * 3.0;
  for (auto& d : delta) d = rng.uniform(0.01, 0.5);
  const auto r = composite(Tensor::leaf({1, rays, s}, dens), Tensor::leaf({1, rays, s}, delta),
                           Tensor::full({1, rays, s, 1}, 1.0), Tensor::full({1, rays, s}, 1.0));
  double worst = 0;
  for (std::size_t i = 0; i < rays; ++i) {
    double total = r.residual.values()[i];
    for (std::size_t j = 0; j < s; ++j) total += r.weights.values()[i * s + j];
    worst = std::max(worst, std::abs(total - 1.0));
  }
  return {worst < 1e-9, "max_err=" + fmt(worst)};
}

Outcome time_zero(Rng& rng) {
  const auto cfg = verify_model();
  const auto motion = MotionGenerator::create(cfg, rng);
  const Tensor ref_t = motion(stack_rows({sample_unit_sphere(cfg.motion_dim, rng)}), {0.0});
  const auto ref = ref_t.values();
  for (int i = 0; i < 100; ++i) {
    const Tensor t = motion(stack_rows({sample_unit_sphere(cfg.motion_dim, rng)}), {0.0});
    const auto v = t.values();
    if (!std::equal(v.begin(), v.end(), ref.begin(), ref.end())) return {false, "differs at draw " + std::to_string(i)};
  }
  return {true, "100 codes identical"};
}

Outcome static_mode(Rng& rng) {
  RenderConfig rc;
  rc.resolution = 8;
  rc.samples = 4;
  rc.bg_samples = 2;
  const auto gen = Generator::create(verify_model(), rc.upsample, rng);
  const auto latents = sample_latents(gen.cfg, rng);
  const auto pose = sample_camera(rc, rng);
  const auto ref = render_frame(gen, pose, 0.0, latents, rc, true).rgb;
  for (int i = 1; i < 8; ++i) {
    if (render_frame(gen, pose, i / 7.0, latents, rc, true).rgb != ref) return {false, "frame " + std::to_string(i) + " differs"};
  }
  return {true, "8 times identical"};
}

Outcome r1_linear(Rng& rng) {
  std::vector<double> a(4 * 4 * 3), x(2 * 4 * 4 * 3);
  double norm2 = 0;
  for (auto& v : a) {
    v = rng.uniform(-1, 1);
    norm2 += v * v;
  }
  for (auto& v : x) v = rng.uniform();
  const Tensor weights = Tensor::leaf({4, 4, 3}, a);
  const auto score = [&](const Tensor& in) { return sum(mul(in, weights), {1, 2, 3}); };
  const double err = std::abs(r1_penalty(score, Tensor::constant({2, 4, 4, 3}, x)).item() - 0.5 * norm2);
  return {err < 1e-10, "err=" + fmt(err)};
}

Outcome r1_weight_grad(Rng& rng) {
  const auto d = Discriminator::create(3, {4, 4}, 0.2, rng);
  const Tensor real = random_tensor({2, 4, 4, 3}, rng, 0, 1, false);
  ParamList params;
  d.collect(params, "d");
  auto leaves = leaves_of(params);
  return grad_outcome(grad_check([&] { return r1_penalty(std::cref(d), real); }, leaves), 1e-3);
}

Outcome adam_closed_form() {
  Tensor x = Tensor::leaf({1}, {1.0}, true);
  Adam opt({0.0025, 0.0, 0.99, 1e-8});
  opt.add_group({{"x", x}}, 1.0);
  opt.step(backward(square(x), {x}));
  const double g = 2.0, v = 0.01 * g * g;
  const double want = 1.0 - 0.0025 * g / (std::sqrt(v / 0.01) + 1e-8);
  Tensor y = Tensor::leaf({1}, {1.0}, true);
  Adam bowl({0.1, 0.0, 0.99, 1e-8});
  bowl.add_group({{"y", y}}, 1.0);
  for (int i = 0; i < 100; ++i) bowl.step(backward(square(y), {y}));
  return {x.item() == want && std::abs(y.item()) < 1e-2, "step=" + fmt(x.item()) + " bowl=" + fmt(y.item())};
}

Outcome center_ray() {
  double worst = 0;
  for (double pitch : {-0.3, 0.0, 0.2})
    for (double yaw : {-1.0, 0.0, 0.6}) {
      const auto pose = make_pose(pitch, yaw, 12);
      const Vec3 d = ray_direction(pose, 0, 0, 1.0);
      for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(d[k] + pose.position[k]));
    }
  return {worst < 1e-9, "max_err=" + fmt(worst)};
}

}  // namespace

std::vector<CheckResult> run_verify(const VerifyOptions& options) {
  Rng rng(options.seed);
  const auto cfg = verify_model();
  const auto gen = Generator::create(cfg, UpsampleMode::Up2x, rng);
  const auto d_time = Discriminator::create(7, cfg.disc_channels, cfg.lrelu_slope, rng);
  const auto d_image = Discriminator::create(3, cfg.disc_channels, cfg.lrelu_slope, rng);
  const Tensor z = stack_rows({sample_unit_sphere(cfg.content_dim, rng)});
  const Tensor m = stack_rows({sample_unit_sphere(cfg.motion_dim, rng)});
  const Tensor w = random_tensor({1, cfg.style_dim}, rng, -1, 1, true);
  const Tensor n = random_tensor({1, cfg.motion_out}, rng, -1, 1, true);
  const Tensor pts = random_tensor({1, 6, 3}, rng, -0.8, 0.8, false);
  const Tensor feat = random_tensor({1, 6, cfg.feature_dim}, rng, -1, 1, false);
  const Tensor dirs = Tensor::constant({1, 6, 3}, [&] {
    std::vector<double> v;
    for (int i = 0; i < 6; ++i) {
      const auto d = sample_unit_sphere(3, rng);
      v.insert(v.end(), d.begin(), d.end());
    }
    return v;
  }());
  const Tensor img_feat = random_tensor({1, 3, 3, cfg.feature_dim}, rng, -1, 1, false);
  const Tensor pair = random_tensor({1, 8, 8, 7}, rng, 0, 1, false);
  const Tensor frame = random_tensor({1, 8, 8, 3}, rng, 0, 1, false);

  std::vector<std::pair<std::string, std::function<Outcome()>>> checks;
  auto params = [](const auto& net, const char* name) {
    ParamList p;
    net.collect(p, name);
    return p;
  };
  checks.emplace_back("grad.mapping", [&] { return check_param_grads([&] { return sum_all(gen.mapping(z)); }, params(gen.mapping, "map"), 1e-4); });
  checks.emplace_back("grad.motion", [&] { return check_param_grads([&] { return sum_all(gen.motion(m, {0.6})); }, params(gen.motion, "motion"), 1e-4); });
  checks.emplace_back("grad.fg_field", [&] {
    return check_param_grads([&] { const auto s = gen.fg(pts, w, n); return add(sum_all(s.density), sum_all(s.feature)); }, params(gen.fg, "fg"), 1e-4);
  });
  checks.emplace_back("grad.bg_field", [&] {
    const Tensor x4 = inverse_sphere_param(scale(pts, 4.0));
    return check_param_grads([&] { const auto s = (*gen.bg)(x4, w); return add(sum_all(s.density), sum_all(s.feature)); }, params(*gen.bg, "bg"), 1e-4);
  });
  checks.emplace_back("grad.ray_head", [&] { return check_param_grads([&] { return sum_all(square(gen.head(w, feat, dirs))); }, params(gen.head, "head"), 1e-4); });
  checks.emplace_back("grad.upsampler", [&] { return check_param_grads([&] { return sum_all(square(gen.up(img_feat))); }, params(gen.up, "up"), 1e-4); });
  checks.emplace_back("grad.d_time", [&] { return check_param_grads([&] { return sum_all(d_time(pair)); }, params(d_time, "d_time"), 1e-4); });
  checks.emplace_back("grad.d_image", [&] { return check_param_grads([&] { return sum_all(d_image(frame)); }, params(d_image, "d_image"), 1e-4); });
  checks.emplace_back("grad.render_end_to_end", [&] {
    RenderConfig rc;
    rc.resolution = 4;
    rc.samples = 4;
    rc.bg_samples = 2;
    Rng local(options.seed + 1);
    const auto g = Generator::create(cfg, rc.upsample, local);
    RenderRequest req{z, m, {0.4}, {sample_camera(rc, local)}, false};
    ParamList p;
    g.collect(p, "gen");
    return check_param_grads([&] { return mean_all(render_batch(g, req, rc).rgb); }, p, 1e-3);
  });
  checks.emplace_back("render.conservation", [&] { return conservation(rng); });
  checks.emplace_back("render.closed_form", [&] { return transmittance_closed_form(options.self_test_negative); });
  checks.emplace_back("latents.time_zero", [&] { return time_zero(rng); });
  checks.emplace_back("render.static_mode", [&] { return static_mode(rng); });
  checks.emplace_back("r1.linear_closed_form", [&] { return r1_linear(rng); });
  checks.emplace_back("r1.weight_gradient", [&] { return r1_weight_grad(rng); });
  checks.emplace_back("adam.closed_form", [] { return adam_closed_form(); });
  checks.emplace_back("camera.center_ray", [] { return center_ray(); });

  std::vector<CheckResult> out;
  for (const auto& [name, fn] : checks) {
    const auto start = std::chrono::steady_clock::now();
    CheckResult r{name, false, "", 0.0};
    try {
      const auto o = fn();
      r.passed = o.passed;
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_verify_table(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::size_t passed = 0;
  for (const auto& r : results) {
    os << r.name << std::string(width + 2 - r.name.size(), ' ') << (r.passed ? "PASS  " : "FAIL  ") << r.detail
       << " (" << fmt(r.seconds) << "s)\n";
    passed += r.passed;
  }
  os << passed << "/" << results.size() << " checks passed\n";
  return os.str();
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results)
    if (!r.passed) return false;
  return !results.empty();
}

}  // namespace fourfield
