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

// Checkpoint layout, all integers little-endian:
//   "4DGN"  u32 version
//   u32 n, n bytes of config text
//   u64 step
//   u32 n, n bytes of rng state
//   u32 tensor count, then per tensor:
//     u32 n, n bytes of name, u8 dtype (1 = f64), u32 rank, rank x u64 dims,
//     f64 payload
// Anything after the last tensor makes the file corrupt.

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "fourfield/error.hpp"
#include "fourfield/training.hpp"

namespace fourfield {

namespace {

constexpr char kMagic[4] = {'4', 'D', 'G', 'N'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint code assumes little-endian");

class Writer {
 public:
  template <class T>
  void pod(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void bytes(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointCorrupt("checkpoint is truncated");
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const TrainState& state) {
  Writer w;
  w.raw(kMagic, 4);
  w.pod(kVersion);
  w.bytes(to_text(state.cfg));
  w.pod(static_cast<std::uint64_t>(state.step));
  w.bytes(state.rng.state());
  const ParamList tensors = state.tensors();
  w.pod(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.bytes(name);
    w.pod(kDtypeF64);
    w.pod(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.pod(static_cast<std::uint64_t>(d));
    w.raw(t.values().data(), t.numel() * sizeof(double));
  }
  return w.take();
}

TrainState deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw CheckpointCorrupt("not a checkpoint (bad magic)");
  const auto version = r.pod<std::uint32_t>();
  if (version != kVersion) {
    throw CheckpointVersionMismatch("checkpoint version " + std::to_string(version) +
                                    ", this build reads version " + std::to_string(kVersion));
  }
  TrainConfig cfg;
  try {
    cfg = parse_config(r.bytes());
  } catch (const ConfigError& e) {
    throw CheckpointCorrupt(std::string("checkpoint config block: ") + e.what());
  }
  const auto step = r.pod<std::uint64_t>();
  const std::string rng_state = r.bytes();

  std::map<std::string, Tensor> stored;
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes();
    if (r.pod<std::uint8_t>() != kDtypeF64) throw CheckpointCorrupt(name + ": unknown dtype");
    const auto rank = r.pod<std::uint32_t>();
    if (rank > 8) throw CheckpointCorrupt(name + ": implausible rank");
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = r.pod<std::uint64_t>();
      if (d == 0 || d > (std::uint64_t{1} << 32)) throw CheckpointCorrupt(name + ": implausible extent");
      shape.push_back(d);
      numel *= d;
    }
    if (numel > bytes.size() / sizeof(double)) throw CheckpointCorrupt("checkpoint is truncated");
    std::vector<double> values(numel);
    r.raw(values.data(), numel * sizeof(double));
    try {
      stored.emplace(std::move(name), Tensor::constant(std::move(shape), std::move(values)));
    } catch (const NonFiniteError&) {
      throw CheckpointCorrupt("checkpoint holds non-finite values");
    }
  }
  if (!r.done()) throw CheckpointCorrupt("trailing bytes after the tensor table");

  TrainState state = TrainState::create(cfg);
  ParamList weights = state.generator_params();
  const auto disc = state.discriminator_params();
  weights.insert(weights.end(), disc.begin(), disc.end());
  std::size_t used = 0;
  for (auto& [name, t] : weights) {
    const auto it = stored.find(name);
    if (it == stored.end()) throw CheckpointShapeMismatch("checkpoint has no tensor " + name);
    if (it->second.shape() != t.shape()) {
      throw CheckpointShapeMismatch(name + ": stored " + shape_str(it->second.shape()) +
                                    ", model expects " + shape_str(t.shape()));
    }
    const auto src = it->second.values();
    auto dst = t.leaf_values();
    std::copy(src.begin(), src.end(), dst.begin());
    ++used;
  }
  ParamList optim;
  for (const auto& [name, t] : stored) {
    if (name.rfind("opt_", 0) == 0) optim.emplace_back(name, t);
  }
  state.opt_g.load_state(optim, "opt_g");
  state.opt_d.load_state(optim, "opt_d");
  used += 2 + 2 * (state.opt_g.size() + state.opt_d.size());
  if (used != stored.size()) {
    throw CheckpointShapeMismatch("checkpoint holds " + std::to_string(stored.size()) +
                                  " tensors, model expects " + std::to_string(used));
  }
  state.rng.set_state(rng_state);
  state.step = step;
  return state;
}

void save_checkpoint(const std::string& path, const TrainState& state) {
  const std::string bytes = serialize_checkpoint(state);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint into " + path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace fourfield
