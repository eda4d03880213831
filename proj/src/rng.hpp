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
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace silofl {

// Purpose tags for stream keys. Distinct tags give independent streams.
namespace stream {
inline constexpr std::string_view kPartition = "partition";
inline constexpr std::string_view kSynthLabels = "synth-labels";
inline constexpr std::string_view kSynthFeatures = "synth-features";
inline constexpr std::string_view kSplit = "split";
inline constexpr std::string_view kClientSampling = "client-sampling";
inline constexpr std::string_view kLocalTrain = "local-train";
}  // namespace stream

// Deterministic random stream keyed by (seed, purpose, client, round). The key
// is hashed into the seed of a 64-bit Mersenne Twister, so a stream's draws
// depend only on its key, never on what other streams have done.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view purpose, std::uint64_t client = 0,
            std::uint64_t round = 0);

  std::uint64_t next_u64() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform();
  // (0, 1]
  double uniform_open();
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  static std::uint64_t derive_key(std::uint64_t seed, std::string_view purpose,
                                  std::uint64_t client, std::uint64_t round);

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// Gamma(shape, 1). Marsaglia-Tsang; shapes below 1 use the boost
// Gamma(shape + 1) * U^(1/shape).
double gamma_sample(double shape, RngStream& rng);
// Log of a Gamma(shape, 1) draw; finite even where the draw itself underflows.
double log_gamma_sample(double shape, RngStream& rng);

}  // namespace silofl
