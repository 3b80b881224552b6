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

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fourfield/discriminators.hpp"
#include "fourfield/rng.hpp"
#include "fourfield/tensor.hpp"

namespace fourfield {

enum class ClipKind { Blink, Bounce, Orbit };

std::string to_string(ClipKind kind);
ClipKind parse_clip_kind(const std::string& text);

struct VideoClip {
  std::size_t height = 0;
  std::size_t width = 0;
  /// 8-bit RGB frames, row-major H x W x 3.
  std::vector<std::vector<std::uint8_t>> frames;
  /// Generator parameters as key=value pairs.
  std::vector<std::pair<std::string, std::string>> meta;

  std::size_t frame_count() const { return frames.size(); }
  /// Frame i as [H, W, 3] values in [0, 1].
  Tensor frame(std::size_t i) const;
  std::string meta_value(const std::string& key) const;
};

struct CorpusManifest {
  ClipKind kind = ClipKind::Blink;
  std::size_t clips = 0;
  std::size_t frames = 16;
  std::size_t height = 16;
  std::size_t width = 16;
  std::uint64_t seed = 0;
};

struct Corpus {
  CorpusManifest manifest;
  std::vector<VideoClip> clips;
};

/// Frame i of an F-frame clip sits at t = i / (F - 1).
double frame_time(std::size_t i, std::size_t frames);

/// Disc centre along one axis: p0 + v t folded back into [lo, hi] by
/// mirror reflection at the walls.
double reflect_coordinate(double p0, double v, double t, double lo, double hi);

/// Pixel values in [0, 1] for one clip, before quantisation.
struct ClipValues {
  std::vector<std::vector<double>> frames;
  std::vector<std::pair<std::string, std::string>> meta;
};
ClipValues synthesize_clip(ClipKind kind, std::size_t frames, std::size_t height,
                           std::size_t width, Rng& rng);

Corpus generate_corpus(ClipKind kind, std::size_t clips, std::size_t frames, std::size_t height,
                       std::size_t width, std::uint64_t seed);

/// Layout: dir/manifest.txt, dir/clip_00042/frame_00.ppm, dir/clip_00042/meta.txt.
void write_corpus(const Corpus& corpus, const std::string& dir);
/// Validates the manifest against the files on disk.
Corpus read_corpus(const std::string& dir);

/// Two distinct indices i < j drawn uniformly from {0..frames-1}.
std::pair<std::size_t, std::size_t> sample_index_pair(std::size_t frames, Rng& rng);

FramePair sample_real_pair(const Corpus& corpus, Rng& rng);

struct PairBatch {
  Tensor a;  // [B, H, W, 3]
  Tensor b;  // [B, H, W, 3]
  std::vector<double> dt;
};
PairBatch sample_real_pairs(const Corpus& corpus, std::size_t batch, Rng& rng);
/// Single frames from uniformly chosen clips and frame indices.
Tensor sample_real_frames(const Corpus& corpus, std::size_t batch, Rng& rng);

struct CorpusStats {
  std::array<double, 3> channel_mean{};
  std::array<double, 3> channel_std{};
  /// Mean over frames of the per-frame average pixel value.
  double brightness_mean = 0.0;
  /// Spread of the per-frame average pixel value across all frames.
  double brightness_std = 0.0;
  /// Mean squared difference between consecutive frames.
  double temporal_energy = 0.0;
  std::size_t frame_count = 0;
};

/// Computed from exact integer sums of the 8-bit data.
CorpusStats corpus_stats(const Corpus& corpus);

/// Mean and std of per-frame brightness for a batch of frames [B, H, W, 3].
std::pair<double, double> brightness_stats(const Tensor& frames);

}  // namespace fourfield
