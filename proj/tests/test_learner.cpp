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
#include <cmath>
#include <numeric>
#include <random>

#include "datagen.hpp"
#include "doctest.h"
#include "error.hpp"
#include "learner.hpp"
#include "support/files.hpp"

using namespace silofl;
using silofl::testing::TempDir;

namespace {

HeadParams random_head(int c, int d, std::mt19937_64& g, double scale = 1.0) {
  std::normal_distribution<double> n(0, scale);
  HeadParams p(c, d);
  for (double& v : p.flat()) v = n(g);
  return p;
}

EmbeddingDataset make_data(int c, int d, int n, std::mt19937_64& g) {
  std::normal_distribution<double> nd(0, 1);
  EmbeddingDataset ds{d, c, {}, {}};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.features.push_back(nd(g));
    ds.labels.push_back(static_cast<int>(g() % c));
  }
  return ds;
}

// Loss written out directly, used for finite differences.
double direct_loss(const HeadParams& p, const EmbeddingDataset& ds, const std::vector<std::size_t>& batch) {
  double total = 0;
  for (std::size_t i : batch) {
    std::vector<long double> z(p.num_classes());
    for (int c = 0; c < p.num_classes(); ++c) {
      long double s = p.b(c);
      for (int j = 0; j < p.dim(); ++j) s += static_cast<long double>(p.w(c, j)) * ds.row(i)[j];
      z[c] = s;
    }
    const long double top = *std::max_element(z.begin(), z.end());
    long double sum = 0;
    for (auto v : z) sum += std::exp(v - top);
    total += static_cast<double>(top + std::log(sum) - z[ds.labels[i]]);
  }
  return total / batch.size();
}

double accuracy_of(const HeadParams& p, const EmbeddingDataset& ds) { return evaluate(p, ds).accuracy; }

}  // namespace

TEST_CASE("head layout") {
  HeadParams p(3, 2);
  CHECK(p.size() == 9);
  p.w(1, 0) = 5;
  p.b(2) = 7;
  CHECK(p.flat()[2] == 5);
  CHECK(p.flat()[8] == 7);
  std::mt19937_64 g(1);
  const auto r = random_head(4, 7, g);
  const auto back = HeadParams::from_flat(4, 7, r.flat());
  CHECK(back == r);
  CHECK_THROWS_AS(HeadParams::from_flat(4, 6, r.flat()), Error);
  const auto sum = r + r;
  CHECK(sum == r * 2.0);
  CHECK((sum - r) == r);
}

TEST_CASE("forward") {
  HeadParams p(4, 3);
  const std::vector<double> x{1, 2, 3};
  for (double v : forward(p, x)) CHECK(v == doctest::Approx(0.25));
  p.b(0) = 1000;
  const auto q = forward(p, x);
  CHECK(q[0] == doctest::Approx(1.0));
  CHECK(q[1] < 1e-300);
  std::mt19937_64 g(2);
  for (int t = 0; t < 50; ++t) {
    auto big = random_head(4, 3, g, 1e5);
    const auto s = forward(big, x);
    double total = 0;
    for (double v : s) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(total == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(forward(p, std::vector<double>{1, 2}), Error);
}

TEST_CASE("loss at zero head is ln C") {
  std::mt19937_64 g(3);
  const auto ds = make_data(4, 5, 30, g);
  const auto lg = loss_and_grad(HeadParams(4, 5), ds);
  CHECK(lg.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK_THROWS_AS(loss_and_grad(HeadParams(4, 5), ds, std::vector<std::size_t>{}), Error);
}

TEST_CASE("gradient matches central differences") {
  std::mt19937_64 g(4);
  const double h = 1e-5;
  double worst = 0;
  for (int inst = 0; inst < 30; ++inst) {
    const int c = 2 + inst % 4, d = 1 + inst % 6;
    const auto ds = make_data(c, d, 25, g);
    const auto p = random_head(c, d, g);
    std::vector<std::size_t> batch;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (g() % 2) batch.push_back(i);
    }
    if (batch.empty()) batch.push_back(0);
    const auto lg = loss_and_grad(p, ds, batch);
    CHECK(lg.loss == doctest::Approx(direct_loss(p, ds, batch)).epsilon(1e-12));
    for (std::size_t k = 0; k < p.size(); ++k) {
      HeadParams up = p, dn = p;
      up.flat()[k] += h;
      dn.flat()[k] -= h;
      const double fd = (direct_loss(up, ds, batch) - direct_loss(dn, ds, batch)) / (2 * h);
      const double an = lg.grad.flat()[k];
      const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("batch gradients are linear") {
  std::mt19937_64 g(5);
  const auto ds = make_data(3, 4, 40, g);
  const auto p = random_head(3, 4, g);
  std::vector<std::size_t> a(20), b(20), ab(40);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 20);
  std::iota(ab.begin(), ab.end(), 0);
  const auto ga = loss_and_grad(p, ds, a).grad, gb = loss_and_grad(p, ds, b).grad;
  const auto gab = loss_and_grad(p, ds, ab).grad;
  for (std::size_t k = 0; k < p.size(); ++k) {
    CHECK(std::abs(gab.flat()[k] - 0.5 * (ga.flat()[k] + gb.flat()[k])) <= 1e-12);
  }
}

TEST_CASE("confident correct predictions") {
  EmbeddingDataset ds{2, 2, {1, 0, 0, 1}, {0, 1}};
  HeadParams p(2, 2);
  p.w(0, 0) = 50;
  p.w(1, 1) = 50;
  const auto lg = loss_and_grad(p, ds);
  CHECK(lg.loss < 1e-6);
  double norm = 0;
  for (double v : lg.grad.flat()) norm += v * v;
  CHECK(std::sqrt(norm) < 1e-6);
  EmbeddingDataset one{2, 2, {1, 0}, {0}};
  const auto ev = evaluate(p, one);
  CHECK(ev.accuracy == 1.0);
  CHECK(ev.loss < 1e-6);
}

TEST_CASE("local training") {
  std::mt19937_64 g(6);
  const auto ds = make_data(3, 4, 50, g);
  const auto p = random_head(3, 4, g);
  SUBCASE("zero lr leaves params unchanged") {
    RngStream r(1, "lt");
    CHECK(local_train(p, ds, {2, 7, 0.0}, r) == p);
  }
  SUBCASE("full batch equals one gradient step") {
    RngStream r(1, "lt");
    const auto out = local_train(p, ds, {1, 50, 0.3}, r);
    const auto expect = p - 0.3 * loss_and_grad(p, ds).grad;
    for (std::size_t k = 0; k < p.size(); ++k) {
      CHECK(out.flat()[k] == doctest::Approx(expect.flat()[k]).epsilon(1e-12));
    }
  }
  SUBCASE("deterministic per stream") {
    RngStream r1(3, "lt", 2, 5), r2(3, "lt", 2, 5);
    CHECK(local_train(p, ds, {2, 8, 0.1}, r1) == local_train(p, ds, {2, 8, 0.1}, r2));
  }
  SUBCASE("partial last batch is used") {
    // 50 samples at B = 49 make two steps; compare against one step at B = 50
    RngStream r1(1, "lt"), r2(1, "lt");
    CHECK_FALSE(local_train(p, ds, {1, 49, 0.1}, r1) == local_train(p, ds, {1, 50, 0.1}, r2));
  }
  SUBCASE("invalid input") {
    RngStream r(1, "lt");
    CHECK_THROWS_AS(local_train(p, EmbeddingDataset{4, 3, {}, {}}, {}, r), Error);
    CHECK_THROWS_AS(local_train(p, ds, {0, 8, 0.1}, r), Error);
    CHECK_THROWS_AS((LocalTrainConfig{1, 8, 0.0}.validate()), Error);
  }
}

TEST_CASE("tie rule on a balanced set") {
  const auto ds = synth_embeddings(4, 8, 400, 1.0, 3);
  CHECK(evaluate(HeadParams(4, 8), ds).accuracy == 0.25);
}

TEST_CASE("separable task is learned") {
  const auto ds = synth_embeddings(4, 64, 2000, 8.0, 11);
  const auto split = stratified_split(ds, 0.2, 11);
  // plain full-batch gradient descent, independent of local_train
  std::vector<double> w(4 * 64, 0.0), b(4, 0.0);
  const auto& tr = split.train;
  for (int it = 0; it < 20; ++it) {
    std::vector<double> gw(w.size(), 0.0), gb(4, 0.0);
    for (std::size_t i = 0; i < tr.size(); ++i) {
      double z[4], top = -1e300, sum = 0;
      for (int c = 0; c < 4; ++c) {
        z[c] = b[c];
        for (int j = 0; j < 64; ++j) z[c] += w[c * 64 + j] * tr.row(i)[j];
        top = std::max(top, z[c]);
      }
      for (double& v : z) sum += (v = std::exp(v - top));
      for (int c = 0; c < 4; ++c) {
        const double r = z[c] / sum - (tr.labels[i] == c);
        for (int j = 0; j < 64; ++j) gw[c * 64 + j] += r * tr.row(i)[j] / tr.size();
        gb[c] += r / tr.size();
      }
    }
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= 0.5 * gw[k];
    for (int c = 0; c < 4; ++c) b[c] -= 0.5 * gb[c];
  }
  std::vector<double> flat = w;
  flat.insert(flat.end(), b.begin(), b.end());
  const auto oracle = HeadParams::from_flat(4, 64, flat);
  CHECK(accuracy_of(oracle, split.test) >= 0.95);

  RngStream r(11, stream::kLocalTrain);
  const auto trained = local_train(HeadParams(4, 64), tr, {20, static_cast<int>(tr.size()), 0.5}, r);
  CHECK(accuracy_of(trained, tr) >= 0.95);
  for (std::size_t k = 0; k < trained.size(); ++k) {
    CHECK(trained.flat()[k] == doctest::Approx(oracle.flat()[k]).epsilon(1e-9));
  }
}

TEST_CASE("indistinguishable classes stay at chance") {
  const auto ds = synth_embeddings(4, 64, 8000, 0.0, 12);
  const auto split = stratified_split(ds, 0.2, 12);
  RngStream r(12, stream::kLocalTrain);
  const auto trained = local_train(HeadParams(4, 64), split.train, {5, 256, 0.05}, r);
  CHECK(accuracy_of(trained, split.test) <= 0.25 + 0.05);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("head");
  std::mt19937_64 g(7);
  const auto p = random_head(3, 5, g);
  write_head(p, dir / "h.csv");
  CHECK(read_head(dir / "h.csv") == p);
  write_head(p, dir / "h2.csv");
  CHECK(testing::read_text(dir / "h.csv") == testing::read_text(dir / "h2.csv"));
  testing::write_text(dir / "bad.csv", "kind,row,col,value\nW,0,1,1.0\nW,0,0,2.0\nb,0,0,1\n");
  CHECK_THROWS_AS(read_head(dir / "bad.csv"), Error);
}
