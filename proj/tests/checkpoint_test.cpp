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

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "fourfield/training.hpp"

namespace fourfield {
namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.model.content_dim = c.model.motion_dim = c.model.style_dim = 6;
  c.model.mapping_layers = 2;
  c.model.motion_hidden = 6;
  c.model.motion_out = 5;
  c.model.fg_layers = 2;
  c.model.fg_hidden = 8;
  c.model.feature_dim = 4;
  c.model.density_hidden = 4;
  c.model.bg_layers = 2;
  c.model.bg_hidden = 4;
  c.model.pos_bands = 3;
  c.model.dir_bands = 2;
  c.model.disc_channels = {4, 8};
  c.render.resolution = 8;
  c.render.samples = 4;
  c.render.bg_samples = 2;
  c.batch = 2;
  c.frames = 4;
  c.r1_interval = 2;
  c.path_samples = 4;
  c.seed = 9;
  return c;
}

Corpus tiny_corpus() { return generate_corpus(ClipKind::Blink, 4, 4, 8, 8, 5); }

std::uint32_t read_u32(const std::string& s, std::size_t at) {
  std::uint32_t v;
  std::memcpy(&v, s.data() + at, 4);
  return v;
}

std::string with_config_text(const std::string& bytes, const std::string& text) {
  const std::uint32_t old_len = read_u32(bytes, 8);
  std::string out = bytes.substr(0, 8);
  const auto n = static_cast<std::uint32_t>(text.size());
  out.append(reinterpret_cast<const char*>(&n), 4);
  out += text;
  out += bytes.substr(12 + old_len);
  return out;
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  auto state = TrainState::create(tiny_config());
  train(state, tiny_corpus(), 3);
  const std::string a = serialize_checkpoint(state);
  EXPECT_EQ(a.substr(0, 4), "4DGN");
  EXPECT_EQ(read_u32(a, 4), 1u);
  const auto loaded = deserialize_checkpoint(a);
  EXPECT_EQ(loaded.step, 3u);
  EXPECT_EQ(serialize_checkpoint(loaded), a);

  const auto path = std::filesystem::temp_directory_path() / "fourfield_ckpt_test.bin";
  save_checkpoint(path.string(), state);
  EXPECT_EQ(serialize_checkpoint(load_checkpoint(path.string())), a);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(path.string()), IoError);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const std::string good = serialize_checkpoint(TrainState::create(tiny_config()));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, good.size() / 2, good.size() - 1}) {
    EXPECT_THROW(deserialize_checkpoint(good.substr(0, cut)), CheckpointCorrupt) << cut;
  }
  EXPECT_THROW(deserialize_checkpoint(good + "x"), CheckpointCorrupt);
  std::string magic = good;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(magic), CheckpointCorrupt);
  std::string version = good;
  version[4] = 2;
  EXPECT_THROW(deserialize_checkpoint(version), CheckpointVersionMismatch);
  EXPECT_THROW(deserialize_checkpoint(with_config_text(good, "model.fg_hidden = banana\n")),
               CheckpointCorrupt);
}

TEST(Checkpoint, ShapeMismatchIsDetected) {
  const std::string good = serialize_checkpoint(TrainState::create(tiny_config()));
  auto wider = tiny_config();
  wider.model.fg_hidden = 9;
  EXPECT_THROW(deserialize_checkpoint(with_config_text(good, to_text(wider))), CheckpointShapeMismatch);
  auto no_bg = tiny_config();
  no_bg.model.background = false;
  EXPECT_THROW(deserialize_checkpoint(with_config_text(good, to_text(no_bg))), CheckpointShapeMismatch);
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  const auto corpus = tiny_corpus();
  auto straight = TrainState::create(tiny_config());
  const auto full = train(straight, corpus, 10);

  auto first = TrainState::create(tiny_config());
  train(first, corpus, 5);
  auto resumed = deserialize_checkpoint(serialize_checkpoint(first));
  const auto rest = train(resumed, corpus, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_TRUE(rest[i].same_values(full[5 + i])) << format_metrics(rest[i]) << "\n" << format_metrics(full[5 + i]);
  }
  EXPECT_EQ(serialize_checkpoint(resumed), serialize_checkpoint(straight));
}

TEST(Checkpoint, StaticPretrainWeightsSurvive) {
  auto state = TrainState::create(tiny_config());
  pretrain_static(state, tiny_corpus(), 2);
  const auto loaded = deserialize_checkpoint(serialize_checkpoint(state));
  const auto a = state.tensors(), b = loaded.tensors();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].first, b[i].first);
    const auto x = a[i].second.values(), y = b[i].second.values();
    EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin(), y.end())) << a[i].first;
  }
}

}  // namespace
}  // namespace fourfield
