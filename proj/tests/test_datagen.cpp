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
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "datagen.hpp"
#include "doctest.h"
#include "error.hpp"
#include "rng.hpp"
#include "support/files.hpp"

using namespace silofl;
using silofl::testing::TempDir;

namespace {

std::vector<int> balanced_labels(int classes, int per_class) {
  std::vector<int> labels;
  for (int c = 0; c < classes; ++c) labels.insert(labels.end(), per_class, c);
  return labels;
}

double mean_max_share(const PartitionSpec& p, std::span<const int> labels, int classes) {
  std::vector<std::vector<int>> counts(p.num_clients, std::vector<int>(classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) counts[p.assignment[i]][labels[i]]++;
  double total = 0;
  for (const auto& row : counts) {
    const int n = std::accumulate(row.begin(), row.end(), 0);
    total += static_cast<double>(*std::max_element(row.begin(), row.end())) / n;
  }
  return total / p.num_clients;
}

}  // namespace

TEST_CASE("streams are keyed") {
  RngStream a(5, stream::kPartition, 1, 2), b(5, stream::kPartition, 1, 2);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  RngStream c(5, stream::kPartition, 1, 3), d(5, stream::kSplit, 1, 2), e(6, stream::kPartition, 1, 2);
  RngStream ref(5, stream::kPartition, 1, 2);
  const auto x = ref.next_u64();
  CHECK(c.next_u64() != x);
  CHECK(d.next_u64() != x);
  CHECK(e.next_u64() != x);
  CHECK(RngStream::derive_key(1, "a", 0, 0) != RngStream::derive_key(1, "b", 0, 0));
}

TEST_CASE("stream draws stay in range") {
  RngStream r(1, "range");
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    const double v = r.uniform_open();
    CHECK_UNARY(v > 0.0);
    CHECK_UNARY(v <= 1.0);
    CHECK_UNARY(r.below(7) < 7);
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.01).scale(1));
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.01));
  std::vector<int> items(50);
  std::iota(items.begin(), items.end(), 0);
  r.shuffle(std::span<int>(items));
  std::vector<int> sorted = items;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("gamma moments") {
  RngStream r(3, "gamma-mean");
  double sum = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) sum += gamma_sample(0.5, r);
  CHECK(std::abs(sum / n - 0.5) <= 0.01);

  RngStream r2(3, "gamma-var");
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = gamma_sample(2.0, r2);
    s1 += x;
    s2 += x * x;
  }
  const double mean = s1 / n;
  CHECK(std::abs(s2 / n - mean * mean - 2.0) <= 0.05);

  RngStream a(9, "g"), b(9, "g");
  CHECK(gamma_sample(0.3, a) == gamma_sample(0.3, b));
  CHECK_THROWS_AS(gamma_sample(0.0, a), Error);
  CHECK_THROWS_AS(gamma_sample(-1.0, a), Error);
  for (int i = 0; i < 1000; ++i) CHECK(std::isfinite(log_gamma_sample(0.001, a)));
}

TEST_CASE("dirichlet draws") {
  RngStream r(4, "dir");
  const std::vector<double> one{0.7};
  CHECK(dirichlet_sample(one, r) == std::vector<double>{1.0});
  const std::vector<double> big(4, 1e6);
  for (int t = 0; t < 20; ++t) {
    for (double p : dirichlet_sample(big, r)) CHECK(std::abs(p - 0.25) <= 0.01);
  }
  for (double a : {0.01, 0.5, 1.0, 100.0}) {
    const std::vector<double> alpha(10, a);
    for (int t = 0; t < 200; ++t) {
      const auto p = dirichlet_sample(alpha, r);
      double s = 0;
      for (double v : p) {
        CHECK_UNARY(v >= 0.0);
        CHECK_UNARY(std::isfinite(v));
        s += v;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("partition is exhaustive and disjoint") {
  const auto labels = balanced_labels(4, 250);
  for (double alpha : {0.1, 0.5, 10.0}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto p = dirichlet_partition(labels, 10, alpha, seed);
      REQUIRE(p.assignment.size() == labels.size());
      std::vector<std::size_t> seen;
      for (int k = 0; k < 10; ++k) {
        const auto idx = p.client_indices(k);
        CHECK_FALSE(idx.empty());
        seen.insert(seen.end(), idx.begin(), idx.end());
      }
      std::sort(seen.begin(), seen.end());
      CHECK(seen.size() == labels.size());
      CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
      const auto sizes = p.client_sizes();
      CHECK(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) == labels.size());
    }
  }
  const auto a = dirichlet_partition(labels, 10, 0.5, 77);
  const auto b = dirichlet_partition(labels, 10, 0.5, 77);
  CHECK(a.assignment == b.assignment);
  CHECK_THROWS_AS(dirichlet_partition(balanced_labels(1, 5), 10, 0.5, 1), Error);
  CHECK_THROWS_AS(dirichlet_partition(labels, 10, 0.0, 1), Error);
}

TEST_CASE("partition in the concentration limit") {
  const auto labels = balanced_labels(1, 1003);
  const auto p = dirichlet_partition(labels, 10, 1e6, 5);
  for (auto n : p.client_sizes()) CHECK(std::abs(static_cast<double>(n) - 100.3) <= 1.0);
}

TEST_CASE("partition skew") {
  const auto labels = balanced_labels(4, 250);
  double skew = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    skew += mean_max_share(dirichlet_partition(labels, 10, 0.5, seed), labels, 4);
  }
  CHECK(skew / 100 >= 0.4);

  double prev = 2.0;
  for (double alpha : {0.1, 0.5, 10.0}) {
    double s = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      s += mean_max_share(dirichlet_partition(labels, 10, alpha, seed), labels, 4);
    }
    CHECK(s / 50 < prev);
    prev = s / 50;
  }
}

TEST_CASE("synthetic embeddings") {
  const auto a = synth_embeddings(4, 16, 1000, 2.0, 3);
  const auto b = synth_embeddings(4, 16, 1000, 2.0, 3);
  CHECK(a == b);
  CHECK(a.size() == 1000);
  CHECK(a.features.size() == 16000);
  CHECK(a.class_counts() == std::vector<std::size_t>{250, 250, 250, 250});
  CHECK_FALSE(a == synth_embeddings(4, 16, 1000, 2.0, 4));

  // class means sit near s * e_c
  const auto big = synth_embeddings(3, 5, 30000, 3.0, 1);
  std::vector<double> mean(15, 0.0);
  for (std::size_t i = 0; i < big.size(); ++i) {
    for (int j = 0; j < 5; ++j) mean[big.labels[i] * 5 + j] += big.row(i)[j] / 10000.0;
  }
  for (int c = 0; c < 3; ++c) {
    for (int j = 0; j < 5; ++j) CHECK(std::abs(mean[c * 5 + j] - (c == j ? 3.0 : 0.0)) < 0.05);
  }
  CHECK_THROWS_AS(synth_embeddings(4, 3, 100, 1.0, 1), Error);
}

TEST_CASE("stratified split") {
  const auto ds = synth_embeddings(4, 8, 1000, 1.0, 2);
  const auto s = stratified_split(ds, 0.2, 9);
  CHECK(s.test.size() == 200);
  CHECK(s.train.size() == 800);
  CHECK(s.test.class_counts() == std::vector<std::size_t>{50, 50, 50, 50});
  std::vector<std::size_t> all = s.train_indices;
  all.insert(all.end(), s.test_indices.begin(), s.test_indices.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  for (std::size_t i = 0; i < s.test_indices.size(); ++i) {
    CHECK(s.test.labels[i] == ds.labels[s.test_indices[i]]);
  }
  const auto again = stratified_split(ds, 0.2, 9);
  CHECK(again.test_indices == s.test_indices);

  EmbeddingDataset tiny{2, 2, {0, 0, 1, 1, 2, 2}, {0, 0, 1}};
  CHECK_THROWS_AS(stratified_split(tiny, 0.5, 1), Error);
}

TEST_CASE("embedding files") {
  TempDir dir("emb");
  const auto ds = synth_embeddings(4, 6, 120, 1.5, 8);
  save_embeddings(ds, dir / "e.csv");
  CHECK(load_embeddings(dir / "e.csv", 4) == ds);
  CHECK(load_embeddings(dir / "e.csv") == ds);

  testing::write_text(dir / "header.csv", "label,f0,f1\n");
  CHECK_THROWS_AS(load_embeddings(dir / "header.csv"), Error);

  testing::write_text(dir / "range.csv", "label,f0,f1\n0,1,2\n2,3,4\n");
  CHECK_THROWS_AS(load_embeddings(dir / "range.csv", 2), Error);

  testing::write_text(dir / "ragged.csv", "label,f0,f1\n0,1,2\n1,3\n");
  try {
    load_embeddings(dir / "ragged.csv");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
}

TEST_CASE("partition file") {
  TempDir dir("part");
  const auto labels = balanced_labels(2, 6);
  const auto p = dirichlet_partition(labels, 3, 1.0, 4);
  write_partition(p, dir / "p.csv");
  const std::string text = testing::read_text(dir / "p.csv");
  CHECK(text.rfind("sample_index,client_id\n0,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 13);
}
