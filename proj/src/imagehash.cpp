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

#include "imagehash.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "error.hpp"

namespace silofl {

namespace {

constexpr int kGrid = 16;
constexpr int kPhashInput = 64;

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

// basis[k * n + i] = alpha_k * cos(pi * (2i + 1) * k / (2n))
std::vector<double> dct_basis(int n) {
  std::vector<double> basis(static_cast<std::size_t>(n) * n);
  const double a0 = std::sqrt(1.0 / n);
  const double ak = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n; ++i) {
      basis[static_cast<std::size_t>(k) * n + i] =
          (k == 0 ? a0 : ak) *
          std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * n));
    }
  }
  return basis;
}

// out = B_r * in * B_c^T (forward) or B_r^T * in * B_c (inverse).
RealMatrix separable(const RealMatrix& in, bool inverse) {
  const int rows = in.rows;
  const int cols = in.cols;
  const auto br = dct_basis(rows);
  const auto bc = dct_basis(cols);
  auto row_coef = [&](int k, int i) {
    return inverse ? br[static_cast<std::size_t>(i) * rows + k]
                   : br[static_cast<std::size_t>(k) * rows + i];
  };
  auto col_coef = [&](int k, int j) {
    return inverse ? bc[static_cast<std::size_t>(j) * cols + k]
                   : bc[static_cast<std::size_t>(k) * cols + j];
  };

  RealMatrix tmp{rows, cols, std::vector<double>(in.values.size())};
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < cols; ++k) {
      double s = 0.0;
      for (int j = 0; j < cols; ++j) s += col_coef(k, j) * in.at(r, j);
      tmp.at(r, k) = s;
    }
  }
  RealMatrix out{rows, cols, std::vector<double>(in.values.size())};
  for (int k = 0; k < rows; ++k) {
    for (int c = 0; c < cols; ++c) {
      double s = 0.0;
      for (int i = 0; i < rows; ++i) s += row_coef(k, i) * tmp.at(i, c);
      out.at(k, c) = s;
    }
  }
  return out;
}

}  // namespace

bool Hash256::bit(int k) const {
  return (words_[k / 64] >> (63 - k % 64)) & 1u;
}

void Hash256::set_bit(int k, bool value) {
  const std::uint64_t mask = std::uint64_t{1} << (63 - k % 64);
  if (value) {
    words_[k / 64] |= mask;
  } else {
    words_[k / 64] &= ~mask;
  }
}

std::string Hash256::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(64, '0');
  for (int w = 0; w < 4; ++w) {
    for (int nib = 0; nib < 16; ++nib) {
      out[w * 16 + nib] = kDigits[(words_[w] >> (60 - 4 * nib)) & 0xF];
    }
  }
  return out;
}

Hash256 Hash256::from_hex(std::string_view hex) {
  if (hex.size() != 64) {
    Throw(ErrorKind::kParse, "hash must be 64 hex characters, got " +
                                 std::to_string(hex.size()));
  }
  Hash256 h;
  for (int i = 0; i < 64; ++i) {
    const int v = hex_value(hex[i]);
    if (v < 0) Throw(ErrorKind::kParse, "invalid hex character in hash '" + std::string(hex) + "'");
    h.words_[i / 16] |= static_cast<std::uint64_t>(v) << (60 - 4 * (i % 16));
  }
  return h;
}

Hash256 Hash256::operator~() const {
  Hash256 h;
  for (int w = 0; w < 4; ++w) h.words_[w] = ~words_[w];
  return h;
}

int hamming(const Hash256& a, const Hash256& b) {
  int d = 0;
  for (int w = 0; w < 4; ++w) d += std::popcount(a.words()[w] ^ b.words()[w]);
  return d;
}

LuminanceMatrix::LuminanceMatrix(int rows, int cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  Require(rows >= 1 && cols >= 1, "luminance matrix must be at least 1x1");
  Require(values_.size() == static_cast<std::size_t>(rows) * cols,
          "luminance matrix size does not match its dimensions");
  for (double v : values_) {
    Require(std::isfinite(v) && v >= 0.0 && v <= 255.0,
            "luminance value outside [0, 255]");
  }
}

LuminanceMatrix::LuminanceMatrix(int rows, int cols, double fill)
    : LuminanceMatrix(rows, cols,
                      std::vector<double>(static_cast<std::size_t>(std::max(rows, 0)) *
                                              std::max(cols, 0),
                                          fill)) {}

LuminanceMatrix to_luminance(std::span<const std::uint8_t> rgb, int width, int height) {
  Require(width >= 1 && height >= 1, "image dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(width) * height;
  Require(rgb.size() == 3 * n, "RGB buffer size does not match dimensions");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
    // BT.601 weights sum to 1 only up to rounding; keep the range invariant.
    out[i] = std::clamp(out[i], 0.0, 255.0);
  }
  return LuminanceMatrix(height, width, std::move(out));
}

LuminanceMatrix resize_bilinear(const LuminanceMatrix& m, int out_rows, int out_cols) {
  Require(out_rows >= 1 && out_cols >= 1, "resize target must be at least 1x1");
  if (out_rows == m.rows() && out_cols == m.cols()) return m;

  struct Tap {
    int lo, hi;
    double frac;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
      double src = (i + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const int lo = static_cast<int>(std::floor(src));
      t[i] = {lo, std::min(lo + 1, in - 1), src - lo};
    }
    return t;
  };
  const auto ty = taps(m.rows(), out_rows);
  const auto tx = taps(m.cols(), out_cols);

  // a + f * (b - a) keeps constant inputs exactly constant.
  std::vector<double> out(static_cast<std::size_t>(out_rows) * out_cols);
  for (int r = 0; r < out_rows; ++r) {
    const Tap& y = ty[r];
    for (int c = 0; c < out_cols; ++c) {
      const Tap& x = tx[c];
      const double a = m.at(y.lo, x.lo), b = m.at(y.lo, x.hi);
      const double d = m.at(y.hi, x.lo), e = m.at(y.hi, x.hi);
      const double top = a + x.frac * (b - a);
      const double bottom = d + x.frac * (e - d);
      out[static_cast<std::size_t>(r) * out_cols + c] =
          std::clamp(top + y.frac * (bottom - top), 0.0, 255.0);
    }
  }
  return LuminanceMatrix(out_rows, out_cols, std::move(out));
}

RealMatrix dct2d(const RealMatrix& m) {
  Require(m.rows >= 1 && m.cols >= 1 &&
              m.values.size() == static_cast<std::size_t>(m.rows) * m.cols,
          "dct2d: malformed matrix");
  // Transform m - m(0,0) and restore the offset on the DC term. Identical in
  // exact arithmetic; constant inputs then give AC coefficients of exactly 0.
  const double ref = m.values[0];
  RealMatrix centered = m;
  for (double& v : centered.values) v -= ref;
  RealMatrix out = separable(centered, /*inverse=*/false);
  out.at(0, 0) += ref * std::sqrt(static_cast<double>(m.rows) * m.cols);
  return out;
}

RealMatrix dct2d(const LuminanceMatrix& m) {
  return dct2d(RealMatrix{m.rows(), m.cols(),
                          std::vector<double>(m.values().begin(), m.values().end())});
}

RealMatrix inverse_dct2d(const RealMatrix& coeffs) {
  Require(coeffs.rows >= 1 && coeffs.cols >= 1 &&
              coeffs.values.size() == static_cast<std::size_t>(coeffs.rows) * coeffs.cols,
          "inverse_dct2d: malformed matrix");
  return separable(coeffs, /*inverse=*/true);
}

Hash256 ahash256(const LuminanceMatrix& m) {
  const LuminanceMatrix small = resize_bilinear(m, kGrid, kGrid);
  const auto v = small.values();
  // Mean as offset from the first cell so a constant grid has mean == value.
  double acc = 0.0;
  for (double x : v) acc += x - v[0];
  const double mean = v[0] + acc / static_cast<double>(v.size());
  Hash256 h;
  for (int k = 0; k < Hash256::kBits; ++k) h.set_bit(k, v[k] > mean);
  return h;
}

Hash256 phash256(const LuminanceMatrix& m) {
  const RealMatrix coeffs = dct2d(resize_bilinear(m, kPhashInput, kPhashInput));
  std::array<double, kGrid * kGrid> block{};
  for (int r = 0; r < kGrid; ++r) {
    for (int c = 0; c < kGrid; ++c) block[r * kGrid + c] = coeffs.at(r, c);
  }
  std::vector<double> ac(block.begin() + 1, block.end());
  auto mid = ac.begin() + static_cast<std::ptrdiff_t>(ac.size() / 2);
  std::nth_element(ac.begin(), mid, ac.end());
  const double median = *mid;
  Hash256 h;
  for (int k = 0; k < Hash256::kBits; ++k) h.set_bit(k, block[k] > median);
  return h;
}

ImageHashes hash_image(std::span<const std::uint8_t> rgb, int width, int height) {
  const LuminanceMatrix lum = to_luminance(rgb, width, height);
  return {ahash256(lum), phash256(lum)};
}

bool is_duplicate_hashes(const ImageHashes& a, const ImageHashes& b, int threshold) {
  return hamming(a.ahash, b.ahash) <= threshold && hamming(a.phash, b.phash) <= threshold;
}

}  // namespace silofl
