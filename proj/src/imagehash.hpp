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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace silofl {

// 256-bit perceptual fingerprint. Bit k (0..255) is cell (k / 16, k % 16) of
// the 16x16 grid; bit 0 is the most significant bit of words[0].
class Hash256 {
 public:
  static constexpr int kBits = 256;

  Hash256() = default;

  bool bit(int k) const;
  void set_bit(int k, bool value);

  // 64 lowercase hex characters, MSB first.
  std::string to_hex() const;
  static Hash256 from_hex(std::string_view hex);

  Hash256 operator~() const;
  friend bool operator==(const Hash256&, const Hash256&) = default;

  const std::array<std::uint64_t, 4>& words() const { return words_; }

 private:
  std::array<std::uint64_t, 4> words_{};
};

int hamming(const Hash256& a, const Hash256& b);

// Row-major grayscale image with values in [0, 255].
class LuminanceMatrix {
 public:
  LuminanceMatrix(int rows, int cols, std::vector<double> values);
  LuminanceMatrix(int rows, int cols, double fill);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double at(int r, int c) const { return values_[static_cast<std::size_t>(r) * cols_ + c]; }
  std::span<const double> values() const { return values_; }

 private:
  int rows_;
  int cols_;
  std::vector<double> values_;
};

// Plain real matrix used for DCT coefficients (no range restriction).
struct RealMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// BT.601 luma from interleaved 8-bit RGB.
LuminanceMatrix to_luminance(std::span<const std::uint8_t> rgb, int width, int height);

// Bilinear resampling with pixel-center alignment, clamped at the borders.
LuminanceMatrix resize_bilinear(const LuminanceMatrix& m, int out_rows, int out_cols);

// Orthonormal type-II 2-D DCT and its inverse.
RealMatrix dct2d(const RealMatrix& m);
RealMatrix dct2d(const LuminanceMatrix& m);
RealMatrix inverse_dct2d(const RealMatrix& coeffs);

Hash256 ahash256(const LuminanceMatrix& m);
Hash256 phash256(const LuminanceMatrix& m);

struct ImageHashes {
  Hash256 ahash;
  Hash256 phash;
};

ImageHashes hash_image(std::span<const std::uint8_t> rgb, int width, int height);

// Both hashes within `threshold` bits.
bool is_duplicate_hashes(const ImageHashes& a, const ImageHashes& b, int threshold);

}  // namespace silofl
