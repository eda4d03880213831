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
#include <span>
#include <vector>

#include "rng.hpp"

namespace silofl {

// Fixed feature vectors (row-major, size() x dim) with integer labels in
// [0, num_classes).
struct EmbeddingDataset {
  int dim = 0;
  int num_classes = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  EmbeddingDataset subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_counts() const;

  friend bool operator==(const EmbeddingDataset&, const EmbeddingDataset&) = default;
};

struct PartitionSpec {
  int num_clients = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::vector<int> assignment;  // sample index -> client id

  std::vector<std::size_t> client_indices(int client) const;
  std::vector<std::size_t> client_sizes() const;
};

// Normalized independent Gamma(alpha_i) draws, computed in log space.
std::vector<double> dirichlet_sample(std::span<const double> alpha, RngStream& rng);

// Per-class Dir(alpha * 1_K) proportions, largest-remainder rounding, then
// empty clients are filled from the largest client.
PartitionSpec dirichlet_partition(std::span<const int> labels, int num_clients, double alpha,
                                  std::uint64_t seed);

// Class means separation * e_c, unit-variance isotropic noise, labels balanced
// round-robin then shuffled.
EmbeddingDataset synth_embeddings(int num_classes, int dim, std::size_t samples,
                                  double separation, std::uint64_t seed);

struct SplitResult {
  EmbeddingDataset train;
  EmbeddingDataset test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

SplitResult stratified_split(const EmbeddingDataset& ds, double test_fraction, std::uint64_t seed);

// CSV with header label,f0,...,f{d-1}. num_classes <= 0 infers max label + 1.
EmbeddingDataset load_embeddings(const std::filesystem::path& path, int num_classes = 0);
void save_embeddings(const EmbeddingDataset& ds, const std::filesystem::path& path);

void write_partition(const PartitionSpec& spec, const std::filesystem::path& path);

}  // namespace silofl
