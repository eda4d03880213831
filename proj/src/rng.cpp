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

#include "rng.hpp"

#include <cmath>
#include <limits>

#include "error.hpp"

namespace silofl {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

std::uint64_t RngStream::derive_key(std::uint64_t seed, std::string_view purpose,
                                    std::uint64_t client, std::uint64_t round) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ fnv1a(purpose));
  h = splitmix64(h ^ client);
  h = splitmix64(h ^ (round * 0xD1B54A32D192ED03ull));
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t client,
                     std::uint64_t round)
    : engine_(derive_key(seed, purpose, client, round)) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  // Marsaglia polar method.
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  Require(n > 0, "below(0)");
  // Rejection on the top of the range keeps the draw unbiased.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double log_gamma_sample(double shape, RngStream& rng) {
  Require(std::isfinite(shape) && shape > 0.0, "gamma shape must be positive");
  if (shape < 1.0) {
    const double boosted = log_gamma_sample(shape + 1.0, rng);
    return boosted + std::log(rng.uniform_open()) / shape;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2 || std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
      return std::log(d) + std::log(v);
    }
  }
}

double gamma_sample(double shape, RngStream& rng) {
  const double g = std::exp(log_gamma_sample(shape, rng));
  return g > 0.0 ? g : std::numeric_limits<double>::denorm_min();
}

}  // namespace silofl
