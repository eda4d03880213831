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

#include <filesystem>
#include <span>
#include <vector>

#include "datagen.hpp"
#include "rng.hpp"

namespace silofl {

// Linear softmax classification head: logits = W x + b. The only state that
// moves between clients and the server.
class HeadParams {
 public:
  HeadParams() = default;
  HeadParams(int num_classes, int dim);  // zeros

  static HeadParams from_flat(int num_classes, int dim, std::span<const double> flat);

  int num_classes() const { return classes_; }
  int dim() const { return dim_; }
  // W row-major, then b; length C*d + C.
  std::span<const double> flat() const { return values_; }
  std::span<double> flat() { return values_; }
  std::size_t size() const { return values_.size(); }

  double w(int c, int j) const { return values_[static_cast<std::size_t>(c) * dim_ + j]; }
  double& w(int c, int j) { return values_[static_cast<std::size_t>(c) * dim_ + j]; }
  double b(int c) const { return values_[static_cast<std::size_t>(classes_) * dim_ + c]; }
  double& b(int c) { return values_[static_cast<std::size_t>(classes_) * dim_ + c]; }

  bool same_shape(const HeadParams& o) const { return classes_ == o.classes_ && dim_ == o.dim_; }
  bool all_finite() const;

  HeadParams& operator+=(const HeadParams& o);
  HeadParams& operator-=(const HeadParams& o);
  HeadParams& operator*=(double s);
  friend HeadParams operator+(HeadParams a, const HeadParams& b) { return a += b; }
  friend HeadParams operator-(HeadParams a, const HeadParams& b) { return a -= b; }
  friend HeadParams operator*(HeadParams a, double s) { return a *= s; }
  friend HeadParams operator*(double s, HeadParams a) { return a *= s; }

  friend bool operator==(const HeadParams&, const HeadParams&) = default;

 private:
  int classes_ = 0;
  int dim_ = 0;
  std::vector<double> values_;
};

struct LocalTrainConfig {
  int epochs = 1;
  int batch_size = 256;
  double lr = 0.05;

  void validate() const;
};

std::vector<double> forward(const HeadParams& p, std::span<const double> x);

struct LossAndGrad {
  double loss = 0.0;
  HeadParams grad;
};

// Mean cross-entropy and its exact gradient over ds rows `batch`.
LossAndGrad loss_and_grad(const HeadParams& p, const EmbeddingDataset& ds,
                          std::span<const std::size_t> batch);
LossAndGrad loss_and_grad(const HeadParams& p, const EmbeddingDataset& ds);

// Mini-batch SGD for cfg.epochs epochs; the last partial batch is kept.
HeadParams local_train(const HeadParams& p, const EmbeddingDataset& shard,
                       const LocalTrainConfig& cfg, RngStream& rng);

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Argmax ties resolve to the lowest class index.
EvalResult evaluate(const HeadParams& p, const EmbeddingDataset& ds);

void write_head(const HeadParams& p, const std::filesystem::path& path);
HeadParams read_head(const std::filesystem::path& path);

}  // namespace silofl
