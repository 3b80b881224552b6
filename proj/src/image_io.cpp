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

#include "fourfield/image_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fourfield/error.hpp"

namespace fourfield {

std::uint8_t quantize_u8(double v) {
  if (!std::isfinite(v)) throw NonFiniteError("quantize_u8: non-finite pixel");
  if (v <= 0.0) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(std::floor(v * 255.0 + 0.5));
}

Image8 to_image8(std::size_t height, std::size_t width, std::size_t channels,
                 const std::vector<double>& values) {
  if (values.size() != height * width * channels) throw ShapeError("to_image8: size mismatch");
  Image8 img{height, width, channels, {}};
  img.data.reserve(values.size());
  for (double v : values) img.data.push_back(quantize_u8(v));
  return img;
}

void write_pnm(const std::string& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) throw ShapeError("write_pnm: 1 or 3 channels");
  if (image.data.size() != image.height * image.width * image.channels) {
    throw ShapeError("write_pnm: size mismatch");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << (image.channels == 3 ? "P6" : "P5") << '\n'
      << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data.data()),
            static_cast<std::streamsize>(image.data.size()));
  if (!out) throw IoError("write failed: " + path);
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::size_t header_number(std::istream& in, const std::string& path) {
  const std::string tok = header_token(in);
  if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
    throw IoError(path + ": malformed PNM header");
  }
  return std::stoul(tok);
}

}  // namespace

Image8 read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  const std::string magic = header_token(in);
  Image8 img;
  if (magic == "P6") {
    img.channels = 3;
  } else if (magic == "P5") {
    img.channels = 1;
  } else {
    throw IoError(path + ": not a binary PPM/PGM file");
  }
  img.width = header_number(in, path);
  img.height = header_number(in, path);
  if (header_number(in, path) != 255) throw IoError(path + ": only maxval 255 is supported");
  img.data.resize(img.height * img.width * img.channels);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size())) throw IoError(path + ": truncated");
  return img;
}

}  // namespace fourfield
