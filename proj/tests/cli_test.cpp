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

#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fourfield/cli.hpp"
#include "fourfield/error.hpp"

namespace fourfield {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t count_lines(const std::string& s, const std::string& prefix) {
  std::istringstream in(s);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.rfind(prefix, 0) == 0;
  return n;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("fourfield_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(path("cfg.txt")) << "model.content_dim = 6\nmodel.motion_dim = 6\nmodel.style_dim = 6\n"
                                      "model.fg_hidden = 8\nmodel.motion_hidden = 8\nrender.resolution = 8\n"
                                      "render.samples = 4\ntrain.batch = 2\n";
    ASSERT_EQ(cli({"gen-data", "--kind", "blink", "--clips", "4", "--frames", "4", "--res", "8", "--seed", "7",
                   "--out", path("corpus")})
                  .code,
              0);
  }
  void TearDown() override {
    unsetenv("FOURFIELD_THREADS");
    fs::remove_all(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, GenDataIsDeterministicAndValidatesArgs) {
  ASSERT_EQ(cli({"gen-data", "--kind", "blink", "--clips", "4", "--frames", "4", "--res", "8", "--seed", "7",
                 "--out", path("again")})
                .code,
            0);
  for (const auto& entry : fs::recursive_directory_iterator(path("corpus"))) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), path("corpus"));
    EXPECT_EQ(slurp(entry.path()), slurp(fs::path(path("again")) / rel)) << rel;
  }
  EXPECT_NE(slurp(path("corpus") + "/manifest.txt").find("clips=4"), std::string::npos);

  const auto missing = cli({"gen-data", "--clips", "4", "--out", path("x")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("--kind"), std::string::npos);
  EXPECT_NE(missing.err.find("Usage"), std::string::npos);
  EXPECT_EQ(cli({"gen-data", "--kind", "sparkle", "--out", path("x")}).code, 2);
  EXPECT_EQ(cli({"frobnicate"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST_F(CliTest, TrainEmitsMetricLinesCheckpointsAndResumes) {
  const auto run = cli({"train", "--config", path("cfg.txt"), "--corpus", path("corpus"), "--steps", "6", "--out",
                        path("ck"), "--checkpoint-every", "3"});
  ASSERT_EQ(run.code, 0) << run.err;
  EXPECT_EQ(count_lines(run.out, "step="), 6u);
  EXPECT_TRUE(fs::exists(path("ck/ckpt_000003.bin")));
  EXPECT_TRUE(fs::exists(path("ck/ckpt_000006.bin")));
  EXPECT_EQ(slurp(path("ck/ckpt_000006.bin")), slurp(path("ck/latest.bin")));

  const auto resumed = cli({"train", "--corpus", path("corpus"), "--resume", path("ck/ckpt_000003.bin"), "--steps",
                            "3", "--out", path("ck2"), "--checkpoint-every", "0"});
  ASSERT_EQ(resumed.code, 0) << resumed.err;
  EXPECT_EQ(slurp(path("ck2/latest.bin")), slurp(path("ck/latest.bin")));
  auto strip_wall = [](const std::string& s) {
    std::istringstream in(s);
    std::string all;
    for (std::string line; std::getline(in, line);) all += line.substr(0, line.find(" wall_ms=")) + "\n";
    return all;
  };
  const std::string full = strip_wall(run.out);
  EXPECT_EQ(full.substr(full.find("step=3 ")), strip_wall(resumed.out));

  EXPECT_EQ(cli({"train", "--corpus", path("corpus"), "--resume", path("ck/latest.bin"), "--config",
                 path("cfg.txt")})
                .code,
            2);
  EXPECT_EQ(cli({"train", "--corpus", path("corpus"), "--resume", path("nope.bin")}).code, 1);
  EXPECT_EQ(cli({"train", "--corpus", path("corpus"), "--set", "model.nonsense=1"}).code, 2);
}

TEST_F(CliTest, AblationTurnsImageTermsOff) {
  const auto run = cli({"train", "--config", path("cfg.txt"), "--corpus", path("corpus"), "--steps", "2", "--out",
                        path("ab"), "--ablate", "no_image_disc"});
  ASSERT_EQ(run.code, 0) << run.err;
  EXPECT_EQ(count_lines(run.out, "step="), 2u);
  EXPECT_NE(run.out.find("L_D_img=- L_G_time="), std::string::npos);
  EXPECT_NE(run.out.find("L_G_img=- R1="), std::string::npos);
  EXPECT_EQ(cli({"train", "--config", path("cfg.txt"), "--corpus", path("corpus"), "--ablate", "bogus"}).code, 2);
}

TEST_F(CliTest, RenderGridNamesDepthAndLatents) {
  ASSERT_EQ(cli({"train", "--config", path("cfg.txt"), "--corpus", path("corpus"), "--steps", "1", "--out",
                 path("ck")})
                .code,
            0);
  const auto ckpt = path("ck/latest.bin");
  const auto run = cli({"render", "--ckpt", ckpt, "--yaw", "-0.3:0.3:5", "--times", "0:1:4", "--out", path("r"),
                        "--depth", "--seed-latent", "3"});
  ASSERT_EQ(run.code, 0) << run.err;
  std::size_t ppm = 0, pgm = 0;
  for (const auto& e : fs::directory_iterator(path("r"))) {
    ppm += e.path().extension() == ".ppm";
    pgm += e.path().extension() == ".pgm";
  }
  EXPECT_EQ(ppm, 20u);
  EXPECT_EQ(pgm, 20u);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) {
      const auto stem = "yaw" + std::to_string(i) + "_t" + std::to_string(j);
      EXPECT_TRUE(fs::exists(path("r/r_" + stem + ".ppm"))) << stem;
      EXPECT_EQ(slurp(path("r/d_" + stem + ".pgm")).substr(0, 2), "P5");
    }

  // Two identical cameras: one latent gives identical frames, fresh latents do not.
  ASSERT_EQ(cli({"render", "--ckpt", ckpt, "--yaw", "0.1:0.1:2", "--times", "0.5", "--out", path("fixed"),
                 "--seed-latent", "9"})
                .code,
            0);
  EXPECT_EQ(slurp(path("fixed/r_yaw0_t0.ppm")), slurp(path("fixed/r_yaw1_t0.ppm")));
  ASSERT_EQ(cli({"render", "--ckpt", ckpt, "--yaw", "0.1:0.1:2", "--times", "0.5", "--out", path("fresh")}).code, 0);
  EXPECT_NE(slurp(path("fresh/r_yaw0_t0.ppm")), slurp(path("fresh/r_yaw1_t0.ppm")));

  setenv("FOURFIELD_THREADS", "3", 1);
  ASSERT_EQ(cli({"render", "--ckpt", ckpt, "--yaw", "-0.3:0.3:5", "--times", "0:1:4", "--out", path("r3"),
                 "--depth", "--seed-latent", "3"})
                .code,
            0);
  for (const auto& e : fs::directory_iterator(path("r"))) {
    EXPECT_EQ(slurp(e.path()), slurp(fs::path(path("r3")) / e.path().filename())) << e.path();
  }
  setenv("FOURFIELD_THREADS", "zero", 1);
  EXPECT_EQ(cli({"render", "--ckpt", ckpt, "--out", path("bad")}).code, 2);
  unsetenv("FOURFIELD_THREADS");
  EXPECT_EQ(cli({"render", "--ckpt", ckpt, "--times", "0:2:3", "--out", path("bad")}).code, 2);
  EXPECT_EQ(cli({"render", "--ckpt", ckpt, "--yaw", "1:2", "--out", path("bad")}).code, 2);
}

TEST_F(CliTest, VerifyExitCodes) {
  const auto good = cli({"verify"});
  EXPECT_EQ(good.code, 0) << good.out;
  EXPECT_NE(good.out.find("checks passed"), std::string::npos);
  const auto bad = cli({"verify", "--self-test-negative"});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST(Sweep, Parsing) {
  EXPECT_EQ(parse_sweep("0:1:3"), (std::vector<double>{0.0, 0.5, 1.0}));
  EXPECT_EQ(parse_sweep("0.25"), (std::vector<double>{0.25}));
  EXPECT_EQ(parse_sweep("2:5:1"), (std::vector<double>{2.0}));
  EXPECT_THROW(parse_sweep("0:1"), ConfigError);
  EXPECT_THROW(parse_sweep("0:1:0"), ConfigError);
  EXPECT_THROW(parse_sweep("0:1:2.5"), ConfigError);
  EXPECT_THROW(parse_sweep("a:1:2"), ConfigError);
}

}  // namespace
}  // namespace fourfield
