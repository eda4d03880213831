// Copyright 2026 The silofl Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace silofl {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB, row-major

  // Copy of the rectangle [x, x + w) x [y, y + h); caller clamps.
  RgbImage crop(int x, int y, int w, int h) const;
};

// Decodes PNG or JPEG (sniffed from the file's magic bytes). Throws
// Error{kIo} for unreadable files and Error{kParse} for undecodable content.
RgbImage read_image(const std::filesystem::path& path);

void write_png(const std::filesystem::path& path, const RgbImage& image);
void write_jpeg(const std::filesystem::path& path, const RgbImage& image, int quality = 95);

bool has_image_extension(const std::filesystem::path& path);

}  // namespace silofl
