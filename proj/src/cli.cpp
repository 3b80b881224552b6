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

#include "fourfield/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include "fourfield/data.hpp"
#include "fourfield/image_io.hpp"
#include "fourfield/training.hpp"
#include "fourfield/verify.hpp"

namespace fourfield {

namespace fs = std::filesystem;

std::vector<double> parse_sweep(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = text.find(':', start);
    parts.push_back(text.substr(start, colon - start));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v)) throw ConfigError("bad sweep value '" + s + "' in '" + text + "'");
    return v;
  };
  if (parts.size() == 1) return {number(parts[0])};
  if (parts.size() != 3) throw ConfigError("sweep must be a or a:b:n, got '" + text + "'");
  const double a = number(parts[0]), b = number(parts[1]), n = number(parts[2]);
  if (n < 1 || n != std::floor(n) || n > 10000) throw ConfigError("sweep count must be a positive integer in '" + text + "'");
  const auto count = static_cast<std::size_t>(n);
  if (count == 1) return {a};
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

std::size_t render_threads() {
  const char* env = std::getenv("FOURFIELD_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError(std::string("FOURFIELD_THREADS must be a positive integer, got '") + env + "'");
  return static_cast<std::size_t>(std::min<long>(v, 256));
}

namespace {

struct GenDataArgs {
  std::string kind;
  std::size_t clips = 64;
  std::size_t frames = 16;
  std::size_t res = 16;
  std::uint64_t seed = 7;
  std::string out;
};

struct TrainArgs {
  std::string config;
  std::string corpus;
  std::string image_corpus;
  std::string out = "checkpoints";
  std::string resume;
  std::vector<std::string> sets;
  std::vector<std::string> ablate;
  std::size_t steps = 500;
  std::size_t pretrain_static = 0;
  std::size_t checkpoint_every = 100;
  std::optional<std::uint64_t> seed;
};

struct RenderArgs {
  std::string ckpt;
  std::string out = "renders";
  std::string yaw = "0";
  std::string pitch = "0";
  std::string times = "0:1:4";
  std::optional<std::uint64_t> seed_latent;
  std::uint64_t seed = 1;
  bool depth = false;
  bool static_mode = false;
};

struct VerifyArgs {
  bool negative = false;
  std::uint64_t seed = 1;
};

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  const ClipKind kind = parse_clip_kind(a.kind);
  const Corpus corpus = generate_corpus(kind, a.clips, a.frames, a.res, a.res, a.seed);
  write_corpus(corpus, a.out);
  out << "wrote " << corpus.clips.size() << " " << to_string(kind) << " clips to " << a.out << "\n";
  return kExitOk;
}

TrainConfig apply_ablation(TrainConfig cfg, const std::string& name) {
  if (name == "no_image_disc") {
    cfg.image_disc = false;
  } else if (name == "no_background") {
    cfg.model.background = false;
  } else if (name == "time_concat") {
    cfg.model.motion_mode = MotionMode::Concat;
  } else if (name == "time_positional") {
    cfg.model.motion_mode = MotionMode::Positional;
  } else {
    throw ConfigError("unknown ablation '" + name + "'");
  }
  return cfg;
}

std::string checkpoint_name(const std::string& dir, std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%06llu.bin", static_cast<unsigned long long>(step));
  return (fs::path(dir) / buf).string();
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  std::optional<TrainState> state;
  if (!a.resume.empty()) {
    if (!a.config.empty() || !a.sets.empty() || !a.ablate.empty() || a.seed) {
      throw ConfigError("--resume takes its config from the checkpoint; drop --config/--set/--ablate/--seed");
    }
  } else {
    TrainConfig cfg = a.config.empty() ? TrainConfig{} : load_config(a.config);
    std::string overrides;
    for (const auto& s : a.sets) overrides += s + "\n";
    cfg = parse_config(overrides, cfg);
    for (const auto& name : a.ablate) cfg = apply_ablation(cfg, name);
    if (a.seed) cfg.seed = *a.seed;
    cfg.validate();
    state.emplace(TrainState::create(cfg));
  }
  // Usage errors above are caught before any file is touched.
  const Corpus corpus = read_corpus(a.corpus);
  const Corpus images = a.image_corpus.empty() ? corpus : read_corpus(a.image_corpus);
  if (!a.resume.empty()) state.emplace(load_checkpoint(a.resume));
  fs::create_directories(a.out);

  const auto on_step = [&](const StepMetrics& m) {
    out << format_metrics(m) << "\n" << std::flush;
    if (a.checkpoint_every > 0 && state->step % a.checkpoint_every == 0) {
      save_checkpoint(checkpoint_name(a.out, state->step), *state);
    }
  };
  if (a.pretrain_static > 0) pretrain_static(*state, images, a.pretrain_static, on_step);
  train_joint(*state, corpus, images, a.steps, on_step);
  save_checkpoint(checkpoint_name(a.out, state->step), *state);
  save_checkpoint((fs::path(a.out) / "latest.bin").string(), *state);
  return kExitOk;
}

struct Cell {
  std::size_t pitch = 0, yaw = 0, time = 0;
  CameraPose pose;
  double t = 0;
  LatentPair latents;
  std::vector<double> rgb;
  std::vector<double> depth;
};

int cmd_render(const RenderArgs& a, std::ostream& out) {
  const auto yaws = parse_sweep(a.yaw), pitches = parse_sweep(a.pitch), times = parse_sweep(a.times);
  for (double t : times)
    if (t < 0 || t > 1) throw ConfigError("render times must lie in [0, 1]");
  const std::size_t threads = render_threads();
  const TrainState state = load_checkpoint(a.ckpt);
  const RenderConfig& rc = state.cfg.render;

  Rng fresh(a.seed);
  std::optional<LatentPair> fixed;
  if (a.seed_latent) {
    Rng r(*a.seed_latent);
    fixed = sample_latents(state.cfg.model, r);
  }
  std::vector<Cell> cells;
  for (std::size_t k = 0; k < pitches.size(); ++k)
    for (std::size_t i = 0; i < yaws.size(); ++i)
      for (std::size_t j = 0; j < times.size(); ++j) {
        Cell c{k, i, j, make_pose(pitches[k], yaws[i], rc.fov_deg), times[j], {}, {}, {}};
        c.latents = fixed ? *fixed : sample_latents(state.cfg.model, fresh);
        cells.push_back(std::move(c));
      }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    NoGradGuard no_grad;
    for (std::size_t idx = next++; idx < cells.size(); idx = next++) {
      try {
        Cell& c = cells[idx];
        RenderRequest req{stack_rows({c.latents.z}), stack_rows({c.latents.m}), {c.t}, {c.pose}, a.static_mode};
        const auto r = render_batch(state.gen, req, rc);
        c.rgb.assign(r.rgb.values().begin(), r.rgb.values().end());
        c.depth.assign(r.depth.values().begin(), r.depth.values().end());
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < std::min(threads, cells.size()); ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  fs::create_directories(a.out);
  const std::size_t side = rc.resolution, ray_side = rc.ray_resolution();
  for (const auto& c : cells) {
    std::string stem = pitches.size() > 1 ? "pitch" + std::to_string(c.pitch) + "_" : "";
    stem += "yaw" + std::to_string(c.yaw) + "_t" + std::to_string(c.time);
    write_pnm((fs::path(a.out) / ("r_" + stem + ".ppm")).string(), to_image8(side, side, 3, c.rgb));
    if (a.depth) {
      // Depth maps are at ray resolution, scaled so near -> 0 and far -> 1.
      std::vector<double> scaled(c.depth.size());
      for (std::size_t p = 0; p < scaled.size(); ++p) {
        scaled[p] = std::clamp((c.depth[p] - rc.near) / (rc.far - rc.near), 0.0, 1.0);
      }
      write_pnm((fs::path(a.out) / ("d_" + stem + ".pgm")).string(), to_image8(ray_side, ray_side, 1, scaled));
    }
  }
  out << "rendered " << cells.size() << " frames to " << a.out << "\n";
  return kExitOk;
}

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  const auto results = run_verify({a.negative, a.seed});
  out << format_verify_table(results);
  return all_passed(results) ? kExitOk : kExitRuntime;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fourfield: 4D video GAN toolkit"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic video corpus");
  gen_cmd->add_option("--kind", gen.kind, "blink, bounce or orbit")->required();
  gen_cmd->add_option("--clips", gen.clips)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--frames", gen.frames)->check(CLI::Range(2, 1000));
  gen_cmd->add_option("--res", gen.res)->check(CLI::Range(2, 4096));
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--out", gen.out, "Corpus directory")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train from scratch or resume");
  train_cmd->add_option("--config", tr.config, "key=value config file");
  train_cmd->add_option("--set", tr.sets, "Extra key=value override (repeatable)");
  train_cmd->add_option("--corpus", tr.corpus, "Video corpus directory")->required();
  train_cmd->add_option("--image-corpus", tr.image_corpus, "Corpus for image steps (defaults to --corpus)");
  train_cmd->add_option("--out", tr.out, "Checkpoint directory");
  train_cmd->add_option("--steps", tr.steps);
  train_cmd->add_option("--pretrain-static", tr.pretrain_static, "Static image steps before video training");
  train_cmd->add_option("--checkpoint-every", tr.checkpoint_every, "0 keeps only the final checkpoint");
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from");
  train_cmd->add_option("--ablate", tr.ablate, "no_image_disc, no_background, time_concat, time_positional");
  train_cmd->add_option("--seed", tr.seed);

  RenderArgs rn;
  auto* render_cmd = app.add_subcommand("render", "Render a camera x time grid from a checkpoint");
  render_cmd->add_option("--ckpt", rn.ckpt)->required();
  render_cmd->add_option("--out", rn.out);
  render_cmd->add_option("--yaw", rn.yaw, "a:b:n sweep in radians");
  render_cmd->add_option("--pitch", rn.pitch, "a:b:n sweep in radians");
  render_cmd->add_option("--times", rn.times, "a:b:n sweep in [0, 1]");
  render_cmd->add_option("--seed-latent", rn.seed_latent, "Use one latent pair for the whole grid");
  render_cmd->add_option("--seed", rn.seed, "Seed for per-frame latents");
  render_cmd->add_flag("--depth", rn.depth, "Also write PGM depth maps");
  render_cmd->add_flag("--static", rn.static_mode, "Zero the motion vector");

  VerifyArgs vf;
  auto* verify_cmd = app.add_subcommand("verify", "Run the invariant battery");
  verify_cmd->add_flag("--self-test-negative", vf.negative, "Corrupt one oracle; the run must fail");
  verify_cmd->add_option("--seed", vf.seed);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_data(gen, out);
    if (train_cmd->parsed()) return cmd_train(tr, out);
    if (render_cmd->parsed()) return cmd_render(rn, out);
    return cmd_verify(vf, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace fourfield
