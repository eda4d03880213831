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

#include "datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "error.hpp"
#include "util.hpp"

namespace silofl {

EmbeddingDataset EmbeddingDataset::subset(std::span<const std::size_t> indices) const {
  EmbeddingDataset out;
  out.dim = dim;
  out.num_classes = num_classes;
  out.labels.reserve(indices.size());
  out.features.reserve(indices.size() * static_cast<std::size_t>(dim));
  for (std::size_t i : indices) {
    Require(i < size(), "subset index out of range");
    out.labels.push_back(labels[i]);
    const auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
  }
  return out;
}

std::vector<std::size_t> EmbeddingDataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::vector<std::size_t> PartitionSpec::client_indices(int client) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == client) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> PartitionSpec::client_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(num_clients), 0);
  for (int c : assignment) ++sizes[static_cast<std::size_t>(c)];
  return sizes;
}

std::vector<double> dirichlet_sample(std::span<const double> alpha, RngStream& rng) {
  Require(!alpha.empty(), "dirichlet needs at least one component");
  std::vector<double> logs(alpha.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) logs[i] = log_gamma_sample(alpha[i], rng);
  const double top = *std::max_element(logs.begin(), logs.end());
  std::vector<double> p(alpha.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logs[i] - top);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

PartitionSpec dirichlet_partition(std::span<const int> labels, int num_clients, double alpha,
                                  std::uint64_t seed) {
  Require(num_clients >= 1, "number of clients must be at least 1");
  Require(std::isfinite(alpha) && alpha > 0.0, "Dirichlet alpha must be positive");
  Require(labels.size() >= static_cast<std::size_t>(num_clients),
          "fewer samples (" + std::to_string(labels.size()) + ") than clients (" +
              std::to_string(num_clients) + ")");

  const std::size_t k = static_cast<std::size_t>(num_clients);
  PartitionSpec spec{num_clients, alpha, seed, std::vector<int>(labels.size(), -1)};
  const std::set<int> classes(labels.begin(), labels.end());
  const std::vector<double> concentration(k, alpha);

  for (int c : classes) {
    RngStream rng(seed, stream::kPartition, static_cast<std::uint64_t>(c));
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    const std::vector<double> p = dirichlet_sample(concentration, rng);
    rng.shuffle(std::span<std::size_t>(members));

    // Largest-remainder rounding; ties go to the lower client id.
    const double n = static_cast<double>(members.size());
    std::vector<std::size_t> counts(k);
    std::vector<std::pair<double, std::size_t>> remainders(k);
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double quota = p[j] * n;
      counts[j] = static_cast<std::size_t>(std::floor(quota));
      assigned += counts[j];
      remainders[j] = {quota - std::floor(quota), j};
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < members.size(); ++r, ++assigned) {
      ++counts[remainders[r % k].second];
    }

    std::size_t pos = 0;
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t t = 0; t < counts[j]; ++t) spec.assignment[members[pos++]] = static_cast<int>(j);
    }
  }

  // Repair empty clients from the largest one (lowest sample index moves).
  for (;;) {
    auto sizes = spec.client_sizes();
    auto empty = std::find(sizes.begin(), sizes.end(), std::size_t{0});
    if (empty == sizes.end()) break;
    const auto largest = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    const auto it = std::find(spec.assignment.begin(), spec.assignment.end(), largest);
    *it = static_cast<int>(empty - sizes.begin());
  }
  return spec;
}

EmbeddingDataset synth_embeddings(int num_classes, int dim, std::size_t samples,
                                  double separation, std::uint64_t seed) {
  Require(num_classes >= 2, "need at least 2 classes");
  Require(dim >= num_classes, "embedding dim must be >= number of classes for orthogonal means");
  Require(samples >= static_cast<std::size_t>(num_classes), "need at least one sample per class");
  Require(std::isfinite(separation), "separation must be finite");

  EmbeddingDataset ds;
  ds.dim = dim;
  ds.num_classes = num_classes;
  ds.labels.resize(samples);
  for (std::size_t i = 0; i < samples; ++i) ds.labels[i] = static_cast<int>(i % num_classes);
  RngStream label_rng(seed, stream::kSynthLabels);
  label_rng.shuffle(std::span<int>(ds.labels));

  RngStream feature_rng(seed, stream::kSynthFeatures);
  ds.features.resize(samples * static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < samples; ++i) {
    double* x = ds.features.data() + i * static_cast<std::size_t>(dim);
    for (int j = 0; j < dim; ++j) x[j] = feature_rng.normal();
    x[ds.labels[i]] += separation;
  }
  return ds;
}

SplitResult stratified_split(const EmbeddingDataset& ds, double test_fraction, std::uint64_t seed) {
  Require(test_fraction > 0.0 && test_fraction < 1.0, "test fraction must be in (0, 1)");
  SplitResult out;
  for (int c = 0; c < ds.num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] == c) members.push_back(i);
    }
    Require(members.size() >= 2, "class " + std::to_string(c) + " has fewer than 2 samples");
    RngStream rng(seed, stream::kSplit, static_cast<std::uint64_t>(c));
    rng.shuffle(std::span<std::size_t>(members));
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * members.size()));
    out.test_indices.insert(out.test_indices.end(), members.begin(), members.begin() + n_test);
    out.train_indices.insert(out.train_indices.end(), members.begin() + n_test, members.end());
  }
  std::sort(out.train_indices.begin(), out.train_indices.end());
  std::sort(out.test_indices.begin(), out.test_indices.end());
  out.train = ds.subset(out.train_indices);
  out.test = ds.subset(out.test_indices);
  return out;
}

EmbeddingDataset load_embeddings(const std::filesystem::path& path, int num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Throw(ErrorKind::kIo, "cannot open embeddings " + path.string());
  std::string line;
  std::vector<std::string> f;
  if (!std::getline(in, line)) Throw(ErrorKind::kParse, path.string() + ":1: missing header");
  split_csv_line(line, f);
  if (f.size() < 2 || f[0] != "label") {
    Throw(ErrorKind::kParse, path.string() + ":1: header must be label,f0,...");
  }
  for (std::size_t j = 1; j < f.size(); ++j) {
    if (f[j] != "f" + std::to_string(j - 1)) {
      Throw(ErrorKind::kParse, path.string() + ":1: expected column f" + std::to_string(j - 1));
    }
  }

  EmbeddingDataset ds;
  ds.dim = static_cast<int>(f.size() - 1);
  int max_label = -1;
  for (long long lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty() || line == "\r") continue;
    const std::string loc = path.string() + ":" + std::to_string(lineno) + ": ";
    split_csv_line(line, f);
    if (f.size() != static_cast<std::size_t>(ds.dim) + 1) {
      Throw(ErrorKind::kParse, loc + "expected " + std::to_string(ds.dim + 1) + " fields, got " +
                                   std::to_string(f.size()));
    }
    int y;
    if (!parse_number(f[0], y) || y < 0 || (num_classes > 0 && y >= num_classes)) {
      Throw(ErrorKind::kParse, loc + "label '" + f[0] + "' out of range");
    }
    for (std::size_t j = 1; j < f.size(); ++j) {
      double v;
      if (!parse_number(f[j], v) || !std::isfinite(v)) {
        Throw(ErrorKind::kParse, loc + "invalid feature value '" + f[j] + "'");
      }
      ds.features.push_back(v);
    }
    ds.labels.push_back(y);
    max_label = std::max(max_label, y);
  }
  if (ds.empty()) Throw(ErrorKind::kInvalidInput, path.string() + ": embedding file has no samples");
  ds.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  return ds;
}

void save_embeddings(const EmbeddingDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Throw(ErrorKind::kIo, "cannot write embeddings " + path.string());
  out << "label";
  for (int j = 0; j < ds.dim; ++j) out << ",f" << j;
  out << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (double v : ds.row(i)) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) Throw(ErrorKind::kIo, "write failed for " + path.string());
}

void write_partition(const PartitionSpec& spec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Throw(ErrorKind::kIo, "cannot write partition " + path.string());
  out << "sample_index,client_id\n";
  for (std::size_t i = 0; i < spec.assignment.size(); ++i) out << i << ',' << spec.assignment[i] << '\n';
}

}  // namespace silofl
