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

#include "learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "error.hpp"
#include "util.hpp"

namespace silofl {

namespace {

void logits(const HeadParams& p, std::span<const double> x, std::vector<double>& z) {
  z.resize(static_cast<std::size_t>(p.num_classes()));
  for (int c = 0; c < p.num_classes(); ++c) {
    double s = p.b(c);
    for (int j = 0; j < p.dim(); ++j) s += p.w(c, j) * x[j];
    z[c] = s;
  }
}

// In place: z -> softmax(z). Returns log-sum-exp of the input.
double softmax_inplace(std::vector<double>& z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : z) v /= sum;
  return top + std::log(sum);
}

void check_dims(const HeadParams& p, const EmbeddingDataset& ds) {
  Require(p.dim() == ds.dim && p.num_classes() == ds.num_classes,
          "head shape (" + std::to_string(p.num_classes()) + "x" + std::to_string(p.dim()) +
              ") does not match dataset (" + std::to_string(ds.num_classes) + "x" +
              std::to_string(ds.dim) + ")");
}

}  // namespace

HeadParams::HeadParams(int num_classes, int dim) : classes_(num_classes), dim_(dim) {
  Require(num_classes >= 1 && dim >= 1, "head dimensions must be positive");
  values_.assign(static_cast<std::size_t>(num_classes) * dim + num_classes, 0.0);
}

HeadParams HeadParams::from_flat(int num_classes, int dim, std::span<const double> flat) {
  HeadParams p(num_classes, dim);
  Require(flat.size() == p.values_.size(), "flat parameter vector has wrong length");
  std::copy(flat.begin(), flat.end(), p.values_.begin());
  return p;
}

bool HeadParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

HeadParams& HeadParams::operator+=(const HeadParams& o) {
  Require(same_shape(o), "head shape mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
  return *this;
}

HeadParams& HeadParams::operator-=(const HeadParams& o) {
  Require(same_shape(o), "head shape mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
  return *this;
}

HeadParams& HeadParams::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

void LocalTrainConfig::validate() const {
  if (epochs < 1) Throw(ErrorKind::kConfig, "local.epochs must be >= 1");
  if (batch_size < 1) Throw(ErrorKind::kConfig, "local.batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) Throw(ErrorKind::kConfig, "local.lr must be > 0");
}

std::vector<double> forward(const HeadParams& p, std::span<const double> x) {
  Require(x.size() == static_cast<std::size_t>(p.dim()),
          "feature length " + std::to_string(x.size()) + " != head dim " + std::to_string(p.dim()));
  std::vector<double> z;
  logits(p, x, z);
  softmax_inplace(z);
  return z;
}

LossAndGrad loss_and_grad(const HeadParams& p, const EmbeddingDataset& ds,
                          std::span<const std::size_t> batch) {
  Require(!batch.empty(), "loss_and_grad: empty batch");
  check_dims(p, ds);
  LossAndGrad out{0.0, HeadParams(p.num_classes(), p.dim())};
  std::vector<double> z;
  for (std::size_t i : batch) {
    const auto x = ds.row(i);
    const int y = ds.labels[i];
    logits(p, x, z);
    const double zy = z[y];
    out.loss += softmax_inplace(z) - zy;
    z[y] -= 1.0;
    for (int c = 0; c < p.num_classes(); ++c) {
      const double r = z[c];
      for (int j = 0; j < p.dim(); ++j) out.grad.w(c, j) += r * x[j];
      out.grad.b(c) += r;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  out.grad *= inv;
  return out;
}

LossAndGrad loss_and_grad(const HeadParams& p, const EmbeddingDataset& ds) {
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss_and_grad(p, ds, all);
}

HeadParams local_train(const HeadParams& p, const EmbeddingDataset& shard,
                       const LocalTrainConfig& cfg, RngStream& rng) {
  Require(!shard.empty(), "local_train: empty shard");
  Require(cfg.epochs >= 1 && cfg.batch_size >= 1, "local_train: epochs and batch size must be >= 1");
  // lr = 0 is allowed here (a no-op step); configs still reject it
  Require(cfg.lr >= 0.0 && std::isfinite(cfg.lr), "local_train: lr must be finite and >= 0");
  check_dims(p, shard);
  HeadParams cur = p;
  std::vector<std::size_t> order(shard.size());
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  for (int e = 0; e < cfg.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t len = std::min(bs, order.size() - start);
      const LossAndGrad lg = loss_and_grad(cur, shard, std::span(order).subspan(start, len));
      auto dst = cur.flat();
      auto g = lg.grad.flat();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] -= cfg.lr * g[k];
    }
  }
  return cur;
}

EvalResult evaluate(const HeadParams& p, const EmbeddingDataset& ds) {
  Require(!ds.empty(), "evaluate: empty dataset");
  check_dims(p, ds);
  std::size_t correct = 0;
  double loss = 0.0;
  std::vector<double> z;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    logits(p, ds.row(i), z);
    const int y = ds.labels[i];
    const auto pred = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    if (pred == y) ++correct;
    const double zy = z[y];
    loss += softmax_inplace(z) - zy;
  }
  return {static_cast<double>(correct) / ds.size(), loss / ds.size()};
}

void write_head(const HeadParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Throw(ErrorKind::kIo, "cannot write head checkpoint " + path.string());
  out << "kind,row,col,value\n";
  for (int c = 0; c < p.num_classes(); ++c) {
    for (int j = 0; j < p.dim(); ++j) out << "W," << c << ',' << j << ',' << format_double(p.w(c, j)) << '\n';
  }
  for (int c = 0; c < p.num_classes(); ++c) out << "b," << c << ",0," << format_double(p.b(c)) << '\n';
  if (!out) Throw(ErrorKind::kIo, "write failed for " + path.string());
}

HeadParams read_head(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Throw(ErrorKind::kIo, "cannot open head checkpoint " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "kind,row,col,value") Throw(ErrorKind::kParse, path.string() + ":1: bad header");

  struct Entry {
    int row, col;
    double value;
  };
  std::vector<Entry> w;
  std::vector<double> b;
  std::vector<std::string> f;
  for (long long lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const std::string loc = path.string() + ":" + std::to_string(lineno) + ": ";
    split_csv_line(line, f);
    int r = 0, c = 0;
    double v = 0.0;
    if (f.size() != 4 || !parse_number(f[1], r) || !parse_number(f[2], c) || !parse_number(f[3], v)) {
      Throw(ErrorKind::kParse, loc + "malformed row");
    }
    if (f[0] == "W") {
      w.push_back({r, c, v});
    } else if (f[0] == "b") {
      if (r != static_cast<int>(b.size())) Throw(ErrorKind::kParse, loc + "b rows out of order");
      b.push_back(v);
    } else {
      Throw(ErrorKind::kParse, loc + "unknown kind '" + f[0] + "'");
    }
  }
  const int classes = static_cast<int>(b.size());
  const int dim = classes > 0 ? static_cast<int>(w.size()) / classes : 0;
  if (classes == 0 || dim == 0 || w.size() != static_cast<std::size_t>(classes) * dim) {
    Throw(ErrorKind::kParse, path.string() + ": inconsistent head shape");
  }
  std::vector<double> flat;
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (w[k].row != static_cast<int>(k) / dim || w[k].col != static_cast<int>(k) % dim) {
      Throw(ErrorKind::kParse, path.string() + ": W entries not in row-major order");
    }
    flat.push_back(w[k].value);
  }
  flat.insert(flat.end(), b.begin(), b.end());
  return HeadParams::from_flat(classes, dim, flat);
}

}  // namespace silofl
