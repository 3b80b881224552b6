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
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fourfield/data.hpp"
#include "fourfield/image_io.hpp"

namespace fourfield {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fourfield_data_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Quantize, RoundHalfUp) {
  EXPECT_EQ(quantize_u8(0.0), 0);
  EXPECT_EQ(quantize_u8(1.0), 255);
  EXPECT_EQ(quantize_u8(-0.2), 0);
  EXPECT_EQ(quantize_u8(1.3), 255);
  EXPECT_EQ(quantize_u8(127.5 / 255.0), 128);
  EXPECT_EQ(quantize_u8(127.49 / 255.0), 127);
  EXPECT_EQ(quantize_u8(0.5 / 255.0), 1);
  EXPECT_THROW(quantize_u8(NAN), NonFiniteError);
}

TEST(ImageIo, RoundTripAndErrors) {
  const auto dir = temp_dir("io");
  fs::create_directories(dir);
  Image8 rgb{2, 3, 3, {}};
  for (int i = 0; i < 18; ++i) rgb.data.push_back(static_cast<std::uint8_t>(i * 14));
  write_pnm((dir / "a.ppm").string(), rgb);
  const auto back = read_pnm((dir / "a.ppm").string());
  EXPECT_EQ(back.height, 2u);
  EXPECT_EQ(back.width, 3u);
  EXPECT_EQ(back.data, rgb.data);
  EXPECT_EQ(slurp(dir / "a.ppm").substr(0, 11), "P6\n3 2\n255\n");

  Image8 grey{2, 2, 1, {0, 64, 128, 255}};
  write_pnm((dir / "g.pgm").string(), grey);
  EXPECT_EQ(read_pnm((dir / "g.pgm").string()).data, grey.data);

  const std::string bytes = slurp(dir / "a.ppm");
  std::ofstream((dir / "cut.ppm"), std::ios::binary) << bytes.substr(0, bytes.size() - 4);
  EXPECT_THROW(read_pnm((dir / "cut.ppm").string()), IoError);
  std::ofstream((dir / "bad.ppm"), std::ios::binary) << "P3\n1 1\n255\n0 0 0\n";
  EXPECT_THROW(read_pnm((dir / "bad.ppm").string()), IoError);
  EXPECT_THROW(read_pnm((dir / "missing.ppm").string()), IoError);
  fs::remove_all(dir);
}

double meta_double(const VideoClip& c, const std::string& key) { return std::stod(c.meta_value(key)); }

TEST(Blink, FrameMeanFollowsSinusoid) {
  const auto corpus = generate_corpus(ClipKind::Blink, 8, 16, 6, 5, 3);
  for (const auto& clip : corpus.clips) {
    const double b0 = meta_double(clip, "b0"), a = meta_double(clip, "amplitude"),
                 phi = meta_double(clip, "phase");
    for (std::size_t f = 0; f < 16; ++f) {
      double mean = 0;
      for (auto v : clip.frames[f]) mean += v;
      mean /= 255.0 * clip.frames[f].size();
      const double want = b0 + a * std::sin(2 * std::numbers::pi * frame_time(f, 16) + phi);
      EXPECT_LE(std::abs(mean - want), 1.0 / 255.0);
    }
  }
}

TEST(Bounce, ReflectionLaw) {
  // Free flight until the wall, then the mirror image of the free path.
  EXPECT_DOUBLE_EQ(reflect_coordinate(0.3, 0.2, 1.0, 0.1, 0.9), 0.5);
  EXPECT_NEAR(reflect_coordinate(0.7, 0.5, 1.0, 0.1, 0.9), 0.9 - (1.2 - 0.9), 1e-15);
  EXPECT_NEAR(reflect_coordinate(0.2, -0.5, 1.0, 0.1, 0.9), 0.1 + (0.1 - (-0.3)), 1e-15);
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double lo = 0.15, hi = 0.85, p0 = rng.uniform(lo, hi), v = rng.uniform(-3, 3);
    const double t = rng.uniform(0, 1), h = 1e-7;
    const double x = reflect_coordinate(p0, v, t, lo, hi);
    EXPECT_GE(x, lo);
    EXPECT_LE(x, hi);
    // Speed is preserved away from the walls.
    const double d = (reflect_coordinate(p0, v, t + h, lo, hi) - x) / h;
    if (x - lo > 1e-5 && hi - x > 1e-5) EXPECT_NEAR(std::abs(d), std::abs(v), 1e-5);
  }
}

TEST(Bounce, DiscCentroidTracksReflectedPath) {
  const auto corpus = generate_corpus(ClipKind::Bounce, 3, 8, 64, 64, 5);
  for (const auto& clip : corpus.clips) {
    const double r = meta_double(clip, "radius");
    for (std::size_t f = 0; f < 8; ++f) {
      const double t = frame_time(f, 8);
      const double cx = reflect_coordinate(meta_double(clip, "x0"), meta_double(clip, "vx"), t, r, 1 - r);
      const double cy = reflect_coordinate(meta_double(clip, "y0"), meta_double(clip, "vy"), t, r, 1 - r);
      // The disc is the set of pixels that differ from the corner colour.
      const auto& px = clip.frames[f];
      double sx = 0, sy = 0, n = 0;
      for (std::size_t i = 0; i < 64; ++i)
        for (std::size_t j = 0; j < 64; ++j) {
          if (px[(i * 64 + j) * 3] != px[0] || px[(i * 64 + j) * 3 + 1] != px[1]) {
            sx += (j + 0.5) / 64;
            sy += (i + 0.5) / 64;
            n += 1;
          }
        }
      ASSERT_GT(n, 0);
      EXPECT_NEAR(sx / n, cx, 1.0 / 64);
      EXPECT_NEAR(sy / n, cy, 1.0 / 64);
    }
  }
}

TEST(Orbit, RecordsCameraPath) {
  const auto corpus = generate_corpus(ClipKind::Orbit, 2, 6, 16, 16, 8);
  for (const auto& clip : corpus.clips) {
    const std::string path = clip.meta_value("yaw_path");
    EXPECT_EQ(std::count(path.begin(), path.end(), ','), 5);
    EXPECT_EQ(clip.meta_value("kind"), "orbit");
    // Frames change as the camera moves around the lit sphere.
    EXPECT_NE(clip.frames.front(), clip.frames.back());
  }
}

TEST(Corpus, DeterministicFilesAndRoundTrip) {
  for (auto kind : {ClipKind::Blink, ClipKind::Bounce, ClipKind::Orbit}) {
    const auto d1 = temp_dir("c1"), d2 = temp_dir("c2");
    write_corpus(generate_corpus(kind, 3, 4, 8, 8, 11), d1.string());
    write_corpus(generate_corpus(kind, 3, 4, 8, 8, 11), d2.string());
    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(d1)) {
      if (!e.is_regular_file()) continue;
      ++files;
      EXPECT_EQ(slurp(e.path()), slurp(d2 / fs::relative(e.path(), d1))) << e.path();
    }
    EXPECT_EQ(files, 1u + 3u * 5u);
    const auto back = read_corpus(d1.string());
    const auto orig = generate_corpus(kind, 3, 4, 8, 8, 11);
    EXPECT_EQ(back.manifest.kind, kind);
    ASSERT_EQ(back.clips.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(back.clips[i].frames, orig.clips[i].frames);
      EXPECT_EQ(back.clips[i].meta, orig.clips[i].meta);
    }
    fs::remove_all(d1);
    fs::remove_all(d2);
  }
  EXPECT_NE(generate_corpus(ClipKind::Blink, 1, 4, 4, 4, 1).clips[0].frames,
            generate_corpus(ClipKind::Blink, 1, 4, 4, 4, 2).clips[0].frames);
}

TEST(Corpus, ManifestValidation) {
  const auto dir = temp_dir("bad");
  write_corpus(generate_corpus(ClipKind::Blink, 3, 4, 8, 8, 1), dir.string());
  fs::remove_all(dir / "clip_00002");
  EXPECT_THROW(read_corpus(dir.string()), IoError);
  fs::remove_all(dir);
  write_corpus(generate_corpus(ClipKind::Blink, 2, 4, 8, 8, 1), dir.string());
  fs::remove(dir / "clip_00001" / "frame_03.ppm");
  EXPECT_THROW(read_corpus(dir.string()), IoError);
  fs::remove_all(dir);
  EXPECT_THROW(generate_corpus(ClipKind::Blink, 0, 4, 8, 8, 1), DomainError);
  EXPECT_THROW(parse_clip_kind("spiral"), ConfigError);
  EXPECT_THROW(read_corpus(dir.string()), IoError);
}

TEST(PairSampling, OrderAndDtLaw) {
  const std::size_t frames = 16;
  Rng rng(12);
  std::vector<double> counts(frames, 0);
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const auto [i, j] = sample_index_pair(frames, rng);
    ASSERT_LT(i, j);
    ASSERT_LT(j, frames);
    counts[j - i] += 1;
  }
  // Enumerate all ordered-by-index pairs to get the law of the gap.
  std::vector<double> law(frames, 0);
  double pairs = 0;
  for (std::size_t i = 0; i < frames; ++i)
    for (std::size_t j = i + 1; j < frames; ++j) {
      law[j - i] += 1;
      pairs += 1;
    }
  for (std::size_t k = 1; k < frames; ++k) {
    EXPECT_DOUBLE_EQ(law[k] / pairs, 2.0 * (frames - k) / (frames * (frames - 1.0)));
    EXPECT_NEAR(counts[k] / n, law[k] / pairs, 0.005) << k;
  }
}

TEST(PairSampling, RealPairs) {
  const auto corpus = generate_corpus(ClipKind::Blink, 4, 5, 4, 4, 13);
  Rng rng(14);
  for (int k = 0; k < 200; ++k) {
    const auto p = sample_real_pair(corpus, rng);
    EXPECT_GT(p.dt, 0.0);
    EXPECT_EQ(p.a.shape(), (Shape{4, 4, 3}));
  }
  const auto two = generate_corpus(ClipKind::Blink, 2, 2, 4, 4, 15);
  for (int k = 0; k < 20; ++k) EXPECT_EQ(sample_real_pair(two, rng).dt, 1.0);
  const auto batch = sample_real_pairs(corpus, 6, rng);
  EXPECT_EQ(batch.a.shape(), (Shape{6, 4, 4, 3}));
  EXPECT_EQ(batch.dt.size(), 6u);
  EXPECT_EQ(sample_real_frames(corpus, 5, rng).shape(), (Shape{5, 4, 4, 3}));
  EXPECT_THROW(sample_real_pair(Corpus{}, rng), DomainError);
}

TEST(Stats, ConstantBlackCorpus) {
  Corpus c;
  c.manifest = {ClipKind::Blink, 2, 3, 2, 2, 0};
  for (int i = 0; i < 2; ++i) {
    VideoClip clip;
    clip.height = clip.width = 2;
    clip.frames.assign(3, std::vector<std::uint8_t>(12, 0));
    c.clips.push_back(clip);
  }
  const auto s = corpus_stats(c);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(s.channel_mean[k], 0.0);
    EXPECT_EQ(s.channel_std[k], 0.0);
  }
  EXPECT_EQ(s.brightness_mean, 0.0);
  EXPECT_EQ(s.brightness_std, 0.0);
  EXPECT_EQ(s.temporal_energy, 0.0);
  EXPECT_EQ(s.frame_count, 6u);
}

TEST(Stats, BlinkEnergyAndOrderInvariance) {
  auto corpus = generate_corpus(ClipKind::Blink, 16, 8, 4, 4, 21);
  const auto s = corpus_stats(corpus);
  EXPECT_GT(s.temporal_energy, 0.0);
  EXPECT_GT(s.brightness_std, 0.0);
  std::reverse(corpus.clips.begin(), corpus.clips.end());
  std::swap(corpus.clips[3], corpus.clips[9]);
  const auto r = corpus_stats(corpus);
  EXPECT_EQ(s.channel_mean, r.channel_mean);
  EXPECT_EQ(s.channel_std, r.channel_std);
  EXPECT_EQ(s.brightness_mean, r.brightness_mean);
  EXPECT_EQ(s.brightness_std, r.brightness_std);
  EXPECT_EQ(s.temporal_energy, r.temporal_energy);

  // The same numbers computed the slow way from the frame tensors.
  std::vector<double> rows;
  for (const auto& clip : corpus.clips)
    for (std::size_t f = 0; f < clip.frame_count(); ++f) {
      const Tensor t = clip.frame(f);
      rows.insert(rows.end(), t.values().begin(), t.values().end());
    }
  const auto [mu, sd] = brightness_stats(Tensor::constant({16 * 8, 4, 4, 3}, rows));
  EXPECT_NEAR(mu, s.brightness_mean, 1e-12);
  EXPECT_NEAR(sd, s.brightness_std, 1e-12);
}

}  // namespace
}  // namespace fourfield
