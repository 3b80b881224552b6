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

#include "fourfield/data.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "fourfield/error.hpp"
#include "fourfield/image_io.hpp"
#include "fourfield/render.hpp"

namespace fourfield {

namespace fs = std::filesystem;

std::string to_string(ClipKind kind) {
  switch (kind) {
    case ClipKind::Blink: return "blink";
    case ClipKind::Bounce: return "bounce";
    case ClipKind::Orbit: return "orbit";
  }
  return "?";
}

ClipKind parse_clip_kind(const std::string& text) {
  if (text == "blink") return ClipKind::Blink;
  if (text == "bounce") return ClipKind::Bounce;
  if (text == "orbit") return ClipKind::Orbit;
  throw ConfigError("unknown clip kind '" + text + "' (expected blink, bounce or orbit)");
}

Tensor VideoClip::frame(std::size_t i) const {
  const auto& f = frames.at(i);
  std::vector<double> v(f.size());
  for (std::size_t k = 0; k < f.size(); ++k) v[k] = f[k] / 255.0;
  return Tensor::constant({height, width, 3}, std::move(v));
}

std::string VideoClip::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw IoError("clip metadata has no key '" + key + "'");
}

double frame_time(std::size_t i, std::size_t frames) {
  if (frames < 2) throw DomainError("a clip needs at least 2 frames");
  return static_cast<double>(i) / static_cast<double>(frames - 1);
}

double reflect_coordinate(double p0, double v, double t, double lo, double hi) {
  const double len = hi - lo;
  if (!(len > 0.0)) throw DomainError("reflect_coordinate: empty interval");
  double s = std::fmod(p0 - lo + v * t, 2.0 * len);
  if (s < 0.0) s += 2.0 * len;
  return lo + (s <= len ? s : 2.0 * len - s);
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ClipValues blink_clip(std::size_t frames, std::size_t h, std::size_t w, Rng& rng) {
  const double b0 = rng.uniform(0.35, 0.6);
  const double a = rng.uniform(0.1, 0.2);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::array<double, 3> delta{};
  for (auto& d : delta) d = rng.uniform(-0.1, 0.1);
  const double centre = (delta[0] + delta[1] + delta[2]) / 3.0;
  for (auto& d : delta) d -= centre;
  ClipValues clip;
  for (std::size_t f = 0; f < frames; ++f) {
    const double t = frame_time(f, frames);
    const double b = b0 + a * std::sin(2.0 * std::numbers::pi * t + phi);
    std::vector<double> px(h * w * 3);
    for (std::size_t p = 0; p < h * w; ++p)
      for (std::size_t c = 0; c < 3; ++c) px[p * 3 + c] = b + delta[c];
    clip.frames.push_back(std::move(px));
  }
  clip.meta = {{"kind", "blink"}, {"b0", num(b0)}, {"amplitude", num(a)}, {"phase", num(phi)},
               {"tint", num(delta[0]) + "," + num(delta[1]) + "," + num(delta[2])}};
  return clip;
}

ClipValues bounce_clip(std::size_t frames, std::size_t h, std::size_t w, Rng& rng) {
  std::array<double, 3> bg{}, fg{};
  for (auto& c : bg) c = rng.uniform(0.1, 0.3);
  for (auto& c : fg) c = rng.uniform(0.5, 1.0);
  const double r = rng.uniform(0.12, 0.2);
  const double x0 = rng.uniform(r, 1.0 - r), y0 = rng.uniform(r, 1.0 - r);
  const double speed = rng.uniform(0.5, 1.5);
  const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double vx = speed * std::cos(ang), vy = speed * std::sin(ang);
  ClipValues clip;
  for (std::size_t f = 0; f < frames; ++f) {
    const double t = frame_time(f, frames);
    const double cx = reflect_coordinate(x0, vx, t, r, 1.0 - r);
    const double cy = reflect_coordinate(y0, vy, t, r, 1.0 - r);
    std::vector<double> px(h * w * 3);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const double x = (j + 0.5) / w, y = (i + 0.5) / h;
        const bool inside = (x - cx) * (x - cx) + (y - cy) * (y - cy) < r * r;
        for (std::size_t c = 0; c < 3; ++c) px[(i * w + j) * 3 + c] = inside ? fg[c] : bg[c];
      }
    clip.frames.push_back(std::move(px));
  }
  clip.meta = {{"kind", "bounce"}, {"radius", num(r)}, {"x0", num(x0)}, {"y0", num(y0)},
               {"vx", num(vx)}, {"vy", num(vy)}};
  return clip;
}

ClipValues orbit_clip(std::size_t frames, std::size_t h, std::size_t w, Rng& rng) {
  constexpr double kRadius = 0.12;
  constexpr double kFov = 18.0;
  std::array<double, 3> colour{}, bg{};
  for (auto& c : colour) c = rng.uniform(0.4, 1.0);
  for (auto& c : bg) c = rng.uniform(0.05, 0.25);
  Vec3 light{rng.normal(), rng.normal(), rng.normal()};
  const double ln = std::sqrt(light[0] * light[0] + light[1] * light[1] + light[2] * light[2]);
  for (auto& c : light) c /= ln;
  const double pitch = rng.uniform(-0.2, 0.2);
  const double yaw0 = rng.uniform(-0.3, 0.3);
  const double omega = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.5, 1.5);
  ClipValues clip;
  std::string path;
  for (std::size_t f = 0; f < frames; ++f) {
    const double yaw = yaw0 + omega * frame_time(f, frames);
    path += (f ? "," : "") + num(yaw);
    const auto pose = make_pose(pitch, yaw, kFov);
    const auto rays = rays_for_camera(pose, h, w, 0.0, 2.0);
    const Vec3& o = pose.position;
    std::vector<double> px(h * w * 3);
    for (std::size_t p = 0; p < h * w; ++p) {
      const Vec3& d = rays.directions[p];
      const double b = o[0] * d[0] + o[1] * d[1] + o[2] * d[2];
      const double disc = b * b - (1.0 - kRadius * kRadius);
      double shade = -1.0;
      if (disc >= 0.0) {
        const double l = -b - std::sqrt(disc);
        Vec3 n{};
        for (int c = 0; c < 3; ++c) n[c] = (o[c] + l * d[c]) / kRadius;
        shade = 0.25 + 0.75 * std::max(0.0, n[0] * light[0] + n[1] * light[1] + n[2] * light[2]);
      }
      for (std::size_t c = 0; c < 3; ++c) px[p * 3 + c] = shade < 0.0 ? bg[c] : colour[c] * shade;
    }
    clip.frames.push_back(std::move(px));
  }
  clip.meta = {{"kind", "orbit"}, {"fov_deg", num(kFov)}, {"pitch", num(pitch)},
               {"yaw0", num(yaw0)}, {"omega", num(omega)}, {"yaw_path", path}};
  return clip;
}

std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(path + ": malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::string clip_dir_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%05zu", i);
  return buf;
}

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%02zu.ppm", i);
  return buf;
}

std::size_t manifest_size(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw IoError("manifest is missing '" + key + "'");
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw IoError("manifest: bad value for '" + key + "'");
  }
}

}  // namespace

ClipValues synthesize_clip(ClipKind kind, std::size_t frames, std::size_t height,
                           std::size_t width, Rng& rng) {
  if (frames < 2) throw DomainError("a clip needs at least 2 frames");
  if (height == 0 || width == 0) throw DomainError("clip resolution must be positive");
  switch (kind) {
    case ClipKind::Blink: return blink_clip(frames, height, width, rng);
    case ClipKind::Bounce: return bounce_clip(frames, height, width, rng);
    case ClipKind::Orbit: return orbit_clip(frames, height, width, rng);
  }
  throw ConfigError("unknown clip kind");
}

Corpus generate_corpus(ClipKind kind, std::size_t clips, std::size_t frames, std::size_t height,
                       std::size_t width, std::uint64_t seed) {
  if (clips == 0) throw DomainError("corpus needs at least one clip");
  Corpus corpus;
  corpus.manifest = {kind, clips, frames, height, width, seed};
  Rng master(seed);
  for (std::size_t i = 0; i < clips; ++i) {
    Rng rng(master.next_u64());
    auto values = synthesize_clip(kind, frames, height, width, rng);
    VideoClip clip;
    clip.height = height;
    clip.width = width;
    clip.meta = std::move(values.meta);
    for (const auto& f : values.frames) clip.frames.push_back(to_image8(height, width, 3, f).data);
    corpus.clips.push_back(std::move(clip));
  }
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& dir) {
  const auto& m = corpus.manifest;
  if (corpus.clips.size() != m.clips) throw IoError("write_corpus: clip count mismatch");
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "manifest.txt");
    if (!out) throw IoError("cannot write manifest in " + dir);
    out << "kind=" << to_string(m.kind) << "\nclips=" << m.clips << "\nframes=" << m.frames
        << "\nheight=" << m.height << "\nwidth=" << m.width << "\nseed=" << m.seed << "\n";
  }
  for (std::size_t i = 0; i < corpus.clips.size(); ++i) {
    const auto& clip = corpus.clips[i];
    const fs::path cdir = fs::path(dir) / clip_dir_name(i);
    fs::create_directories(cdir);
    for (std::size_t f = 0; f < clip.frames.size(); ++f) {
      write_pnm((cdir / frame_name(f)).string(), Image8{clip.height, clip.width, 3, clip.frames[f]});
    }
    std::ofstream meta(cdir / "meta.txt");
    for (const auto& [k, v] : clip.meta) meta << k << '=' << v << '\n';
    if (!meta) throw IoError("cannot write metadata in " + cdir.string());
  }
}

Corpus read_corpus(const std::string& dir) {
  const auto kv = read_key_values((fs::path(dir) / "manifest.txt").string());
  Corpus corpus;
  auto& m = corpus.manifest;
  const auto kind = kv.find("kind");
  if (kind == kv.end()) throw IoError("manifest is missing 'kind'");
  m.kind = parse_clip_kind(kind->second);
  m.clips = manifest_size(kv, "clips");
  m.frames = manifest_size(kv, "frames");
  m.height = manifest_size(kv, "height");
  m.width = manifest_size(kv, "width");
  m.seed = manifest_size(kv, "seed");
  if (m.clips == 0 || m.frames < 2) throw IoError("manifest describes an empty corpus");

  std::size_t on_disk = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("clip_", 0) == 0) ++on_disk;
  }
  if (on_disk != m.clips) {
    throw IoError("manifest lists " + std::to_string(m.clips) + " clips but " + dir + " holds " +
                  std::to_string(on_disk));
  }
  for (std::size_t i = 0; i < m.clips; ++i) {
    const fs::path cdir = fs::path(dir) / clip_dir_name(i);
    VideoClip clip;
    clip.height = m.height;
    clip.width = m.width;
    for (std::size_t f = 0; f < m.frames; ++f) {
      const auto img = read_pnm((cdir / frame_name(f)).string());
      if (img.channels != 3 || img.height != m.height || img.width != m.width) {
        throw IoError((cdir / frame_name(f)).string() + ": resolution differs from the manifest");
      }
      clip.frames.push_back(img.data);
    }
    if (fs::exists(cdir / frame_name(m.frames))) {
      throw IoError(cdir.string() + ": more frames than the manifest lists");
    }
    if (fs::exists(cdir / "meta.txt")) {
      std::ifstream meta(cdir / "meta.txt");
      std::string line;
      while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) clip.meta.emplace_back(line.substr(0, eq), line.substr(eq + 1));
      }
    }
    corpus.clips.push_back(std::move(clip));
  }
  return corpus;
}

std::pair<std::size_t, std::size_t> sample_index_pair(std::size_t frames, Rng& rng) {
  if (frames < 2) throw DomainError("pair sampling needs at least 2 frames");
  std::size_t i = rng.below(frames);
  std::size_t j = rng.below(frames - 1);
  if (j >= i) ++j;
  return i < j ? std::pair{i, j} : std::pair{j, i};
}

FramePair sample_real_pair(const Corpus& corpus, Rng& rng) {
  if (corpus.clips.empty()) throw DomainError("cannot sample from an empty corpus");
  const auto& clip = corpus.clips[rng.below(corpus.clips.size())];
  const auto [i, j] = sample_index_pair(clip.frame_count(), rng);
  const std::size_t f = clip.frame_count();
  return {clip.frame(i), clip.frame(j), frame_time(j, f) - frame_time(i, f)};
}

PairBatch sample_real_pairs(const Corpus& corpus, std::size_t batch, Rng& rng) {
  if (corpus.clips.empty()) throw DomainError("cannot sample from an empty corpus");
  const std::size_t h = corpus.manifest.height, w = corpus.manifest.width;
  std::vector<double> a, b;
  a.reserve(batch * h * w * 3);
  b.reserve(batch * h * w * 3);
  PairBatch out;
  for (std::size_t k = 0; k < batch; ++k) {
    const FramePair p = sample_real_pair(corpus, rng);
    a.insert(a.end(), p.a.values().begin(), p.a.values().end());
    b.insert(b.end(), p.b.values().begin(), p.b.values().end());
    out.dt.push_back(p.dt);
  }
  out.a = Tensor::constant({batch, h, w, 3}, std::move(a));
  out.b = Tensor::constant({batch, h, w, 3}, std::move(b));
  return out;
}

Tensor sample_real_frames(const Corpus& corpus, std::size_t batch, Rng& rng) {
  if (corpus.clips.empty()) throw DomainError("cannot sample from an empty corpus");
  const std::size_t h = corpus.manifest.height, w = corpus.manifest.width;
  std::vector<double> v;
  v.reserve(batch * h * w * 3);
  for (std::size_t k = 0; k < batch; ++k) {
    const auto& clip = corpus.clips[rng.below(corpus.clips.size())];
    const Tensor f = clip.frame(rng.below(clip.frame_count()));
    v.insert(v.end(), f.values().begin(), f.values().end());
  }
  return Tensor::constant({batch, h, w, 3}, std::move(v));
}

CorpusStats corpus_stats(const Corpus& corpus) {
  using i128 = __int128;
  std::array<i128, 3> sum{}, sq{};
  i128 frame_sum = 0, frame_sq = 0, diff_sq = 0;
  std::size_t values_per_channel = 0, frames = 0, diff_count = 0;
  for (const auto& clip : corpus.clips) {
    for (std::size_t f = 0; f < clip.frames.size(); ++f) {
      const auto& px = clip.frames[f];
      i128 fs_ = 0;
      for (std::size_t k = 0; k < px.size(); ++k) {
        sum[k % 3] += px[k];
        sq[k % 3] += static_cast<i128>(px[k]) * px[k];
        fs_ += px[k];
      }
      values_per_channel += px.size() / 3;
      frame_sum += fs_;
      frame_sq += fs_ * fs_;
      ++frames;
      if (f > 0) {
        const auto& prev = clip.frames[f - 1];
        for (std::size_t k = 0; k < px.size(); ++k) {
          const i128 d = static_cast<int>(px[k]) - static_cast<int>(prev[k]);
          diff_sq += d * d;
        }
        diff_count += px.size();
      }
    }
  }
  CorpusStats s;
  s.frame_count = frames;
  if (frames == 0) return s;
  const double n = static_cast<double>(values_per_channel);
  for (int c = 0; c < 3; ++c) {
    s.channel_mean[c] = static_cast<double>(sum[c]) / (255.0 * n);
    const i128 num = sq[c] * static_cast<i128>(values_per_channel) - sum[c] * sum[c];
    s.channel_std[c] = std::sqrt(static_cast<double>(num)) / (255.0 * n);
  }
  const double per_frame = 255.0 * static_cast<double>(corpus.clips.front().frames.front().size());
  const double m = static_cast<double>(frames);
  s.brightness_mean = static_cast<double>(frame_sum) / (per_frame * m);
  const i128 bnum = frame_sq * static_cast<i128>(frames) - frame_sum * frame_sum;
  s.brightness_std = std::sqrt(static_cast<double>(bnum)) / (per_frame * m);
  if (diff_count > 0) s.temporal_energy = static_cast<double>(diff_sq) / (255.0 * 255.0 * diff_count);
  return s;
}

std::pair<double, double> brightness_stats(const Tensor& frames) {
  if (frames.rank() != 4 || frames.dim(0) == 0) throw ShapeError("brightness_stats: expected [B, H, W, C]");
  const std::size_t b = frames.dim(0), per = frames.numel() / b;
  std::vector<double> means(b, 0.0);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t k = 0; k < per; ++k) means[i] += frames.values()[i * per + k];
    means[i] /= static_cast<double>(per);
  }
  double mu = 0;
  for (double v : means) mu += v;
  mu /= static_cast<double>(b);
  double var = 0;
  for (double v : means) var += (v - mu) * (v - mu);
  return {mu, std::sqrt(var / static_cast<double>(b))};
}

}  // namespace fourfield
