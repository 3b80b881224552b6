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

#include "fourfield/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "fourfield/error.hpp"

namespace fourfield {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE || !std::isfinite(d)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return d;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  errno = 0;
  const auto n = std::strtoull(v.c_str(), nullptr, 10);
  if (errno == ERANGE) throw ConfigError(key + ": integer out of range");
  return n;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define FF_DOUBLE(k, member)                                                         \
  Field {                                                                            \
    k, [](const TrainConfig& c) { return fmt_double(c.member); },                    \
        [](TrainConfig& c, const std::string& v) { c.member = parse_double(k, v); } \
  }
#define FF_SIZE(k, member)                                                                     \
  Field {                                                                                      \
    k, [](const TrainConfig& c) { return std::to_string(c.member); },                          \
        [](TrainConfig& c, const std::string& v) {                                             \
          c.member = static_cast<decltype(c.member)>(parse_uint(k, v));                        \
        }                                                                                      \
  }
#define FF_BOOL(k, member)                                                         \
  Field {                                                                          \
    k, [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](TrainConfig& c, const std::string& v) { c.member = parse_bool(k, v); }   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      FF_SIZE("model.content_dim", model.content_dim),
      FF_SIZE("model.motion_dim", model.motion_dim),
      FF_SIZE("model.style_dim", model.style_dim),
      FF_SIZE("model.mapping_layers", model.mapping_layers),
      FF_SIZE("model.motion_hidden", model.motion_hidden),
      FF_SIZE("model.motion_out", model.motion_out),
      Field{"model.motion_mode", [](const TrainConfig& c) { return to_string(c.model.motion_mode); },
            [](TrainConfig& c, const std::string& v) { c.model.motion_mode = parse_motion_mode(v); }},
      FF_SIZE("model.time_bands", model.time_bands),
      FF_SIZE("model.fg_layers", model.fg_layers),
      FF_SIZE("model.fg_hidden", model.fg_hidden),
      FF_SIZE("model.feature_dim", model.feature_dim),
      FF_SIZE("model.density_hidden", model.density_hidden),
      FF_BOOL("model.background", model.background),
      FF_SIZE("model.bg_layers", model.bg_layers),
      FF_SIZE("model.bg_hidden", model.bg_hidden),
      FF_SIZE("model.pos_bands", model.pos_bands),
      FF_SIZE("model.dir_bands", model.dir_bands),
      FF_DOUBLE("model.lrelu_slope", model.lrelu_slope),
      FF_DOUBLE("model.demod_eps", model.demod_eps),
      Field{"model.disc_channels", [](const TrainConfig& c) { return fmt_list(c.model.disc_channels); },
            [](TrainConfig& c, const std::string& v) {
              c.model.disc_channels = parse_list("model.disc_channels", v);
            }},
      FF_SIZE("render.resolution", render.resolution),
      Field{"render.upsample", [](const TrainConfig& c) { return to_string(c.render.upsample); },
            [](TrainConfig& c, const std::string& v) { c.render.upsample = parse_upsample_mode(v); }},
      FF_SIZE("render.samples", render.samples),
      FF_SIZE("render.bg_samples", render.bg_samples),
      FF_DOUBLE("render.near", render.near),
      FF_DOUBLE("render.far", render.far),
      FF_DOUBLE("render.bg_max_radius", render.bg_max_radius),
      FF_DOUBLE("camera.fov_deg", render.fov_deg),
      FF_DOUBLE("camera.pitch_std", render.pitch_std),
      FF_DOUBLE("camera.yaw_std", render.yaw_std),
      FF_DOUBLE("loss.lambda_r1", lambda_r1),
      FF_DOUBLE("loss.lambda_path", lambda_path),
      FF_SIZE("loss.r1_interval", r1_interval),
      FF_SIZE("loss.path_samples", path_samples),
      FF_BOOL("loss.image_disc", image_disc),
      FF_DOUBLE("opt.lr", lr),
      FF_DOUBLE("opt.beta1", beta1),
      FF_DOUBLE("opt.beta2", beta2),
      FF_DOUBLE("opt.eps", adam_eps),
      FF_DOUBLE("opt.mapping_lr_scale", mapping_lr_scale),
      FF_DOUBLE("opt.motion_lr_scale", motion_lr_scale),
      FF_SIZE("train.batch", batch),
      FF_SIZE("train.frames", frames),
      FF_SIZE("train.seed", seed),
      FF_DOUBLE("train.joint_ratio", joint_ratio),
      Field{"aug.policy", [](const TrainConfig& c) { return c.aug_policy; },
            [](TrainConfig& c, const std::string& v) { c.aug_policy = v; }},
      FF_DOUBLE("aug.brightness", aug_brightness),
  };
  return table;
}

#undef FF_DOUBLE
#undef FF_SIZE
#undef FF_BOOL

}  // namespace

std::string to_string(MotionMode mode) {
  switch (mode) {
    case MotionMode::Multiply: return "multiply";
    case MotionMode::Concat: return "concat";
    case MotionMode::Positional: return "positional";
  }
  return "?";
}

std::string to_string(UpsampleMode mode) {
  return mode == UpsampleMode::Direct ? "direct" : "up2x";
}

MotionMode parse_motion_mode(const std::string& text) {
  if (text == "multiply") return MotionMode::Multiply;
  if (text == "concat") return MotionMode::Concat;
  if (text == "positional") return MotionMode::Positional;
  throw ConfigError("unknown motion mode '" + text + "'");
}

UpsampleMode parse_upsample_mode(const std::string& text) {
  if (text == "direct") return UpsampleMode::Direct;
  if (text == "up2x") return UpsampleMode::Up2x;
  throw ConfigError("unknown upsample mode '" + text + "'");
}

TrainConfig TrainConfig::paper_scale() {
  TrainConfig c;
  c.model.content_dim = 512;
  c.model.motion_dim = 512;
  c.model.style_dim = 512;
  c.model.motion_hidden = 512;
  c.model.motion_out = 128;
  c.model.fg_layers = 8;
  c.model.fg_hidden = 128;
  c.model.feature_dim = 128;
  c.model.density_hidden = 64;
  c.model.bg_layers = 4;
  c.model.bg_hidden = 64;
  c.model.disc_channels = {128, 256, 512};
  c.batch = 64;
  c.render.resolution = 256;
  return c;
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(lambda_r1 >= 0 && lambda_path >= 0, "loss weights must be >= 0");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "Adam betas must lie in [0, 1)");
  require(lr > 0 && adam_eps > 0, "learning rate and eps must be > 0");
  require(mapping_lr_scale > 0 && motion_lr_scale > 0, "lr scales must be > 0");
  require(r1_interval >= 1, "loss.r1_interval must be >= 1");
  require(path_samples >= 1, "loss.path_samples must be >= 1");
  require(batch >= 1, "train.batch must be >= 1");
  require(frames >= 2, "train.frames must be >= 2");
  require(joint_ratio >= 0 && joint_ratio <= 1, "train.joint_ratio must lie in [0, 1]");
  require(aug_brightness >= 0, "aug.brightness must be >= 0");
  require(model.content_dim >= 1 && model.motion_dim >= 1 && model.style_dim >= 1,
          "latent dims must be >= 1");
  require(model.mapping_layers >= 1, "model.mapping_layers must be >= 1");
  require(model.motion_hidden >= 1 && model.motion_out >= 1, "motion dims must be >= 1");
  require(model.fg_layers >= 1 && model.fg_hidden >= 1, "foreground dims must be >= 1");
  require(model.bg_layers >= 1 && model.bg_hidden >= 1, "background dims must be >= 1");
  require(model.feature_dim >= 1 && model.density_hidden >= 1, "feature dims must be >= 1");
  require(model.pos_bands >= 1 && model.dir_bands >= 1 && model.time_bands >= 1,
          "band counts must be >= 1");
  require(model.lrelu_slope >= 0 && model.lrelu_slope < 1, "model.lrelu_slope must lie in [0, 1)");
  require(model.demod_eps >= 0, "model.demod_eps must be >= 0");
  require(!model.disc_channels.empty(), "model.disc_channels must not be empty");
  for (auto ch : model.disc_channels) require(ch >= 1, "discriminator channels must be >= 1");
  require(render.resolution >= 1, "render.resolution must be >= 1");
  require(render.upsample == UpsampleMode::Direct || render.resolution % 2 == 0,
          "render.resolution must be even for up2x");
  require(render.samples >= 2, "render.samples must be >= 2");
  require(render.near > 0 && render.near < render.far, "need 0 < render.near < render.far");
  require(render.fov_deg > 0 && render.fov_deg < 120, "camera.fov_deg must lie in (0, 120)");
  require(render.pitch_std >= 0 && render.yaw_std >= 0, "camera stds must be >= 0");
  require(render.bg_max_radius > 1.0 + render.far, "render.bg_max_radius too small");
  std::stringstream ss(aug_policy);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    require(item == "flip" || item == "brightness" || item == "none" || item.empty(),
            "aug.policy: unknown augmentation '" + item + "'");
  }
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    }
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

TrainConfig load_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + "=" + f.get(cfg) + "\n";
  return out;
}

bool operator==(const TrainConfig& a, const TrainConfig& b) { return to_text(a) == to_text(b); }

}  // namespace fourfield
