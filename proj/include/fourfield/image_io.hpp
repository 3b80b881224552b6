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

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace fourfield {

/// 8-bit image, row-major H x W x channels.
struct Image8 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> data;
};

/// Round-half-up quantisation of a value in [0, 1]; values outside are clamped.
std::uint8_t quantize_u8(double v);

/// Binary PPM (P6) for 3 channels, PGM (P5) for 1, maxval 255.
void write_pnm(const std::string& path, const Image8& image);
Image8 read_pnm(const std::string& path);

/// Converts [0, 1] values (H x W x C) to an 8-bit image.
Image8 to_image8(std::size_t height, std::size_t width, std::size_t channels,
                 const std::vector<double>& values);

}  // namespace fourfield
