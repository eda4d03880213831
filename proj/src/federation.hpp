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
#include <functional>
#include <string>
#include <vector>

#include "datagen.hpp"
#include "learner.hpp"

namespace silofl {

enum class Strategy { kFedAvg, kFedAdam };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

// Server-side Adam hyperparameters. Defaults are the tuned values used for
// the headline FedAdam runs.
struct FedAdamParams {
  double eta = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;
};

struct FedConfig {
  int num_clients = 10;
  double fraction = 0.5;
  int rounds = 10;
  double alpha = 0.5;
  LocalTrainConfig local;
  Strategy strategy = Strategy::kFedAvg;
  FedAdamParams adam;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct ServerOptState {
  HeadParams m;
  HeadParams v;

  // m = 0, v = tau^2.
  static ServerOptState initial(int num_classes, int dim, double tau);
};

struct RoundMetrics {
  int round = 0;
  std::vector<int> participants;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
  long long params_transmitted = 0;
};

struct ClientUpdate {
  int client = 0;
  HeadParams params;
  std::size_t samples = 0;
};

// Exactly round(fraction * K) distinct ids, ascending.
std::vector<int> sample_clients(int num_clients, double fraction, std::uint64_t seed, int round);

HeadParams fedavg_aggregate(std::vector<ClientUpdate> updates);

struct FedAdamResult {
  HeadParams params;
  ServerOptState state;
};

// Adam on the data-weighted pseudo-gradient, no bias correction.
FedAdamResult fedadam_step(const ServerOptState& state, const HeadParams& global,
                           std::vector<ClientUpdate> updates, const FedAdamParams& hp);

struct FederatedRun {
  std::vector<RoundMetrics> rounds;
  HeadParams final_params;
};

using CheckpointFn = std::function<void(int round, const HeadParams& global)>;

FederatedRun run_federated(const FedConfig& cfg, const EmbeddingDataset& train,
                           const PartitionSpec& partition, const EmbeddingDataset& test,
                           const CheckpointFn& checkpoint = {});

struct EpochMetrics {
  int epoch = 0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
};

struct CentralizedRun {
  std::vector<EpochMetrics> epochs;  // epoch 0 is the zero-initialized head
  HeadParams final_params;
};

// Uses the local-train stream of (client 0, round 1), so a single-client,
// single-round federated run reproduces it exactly.
CentralizedRun run_centralized(const EmbeddingDataset& train, const EmbeddingDataset& test,
                               int epochs, const LocalTrainConfig& local, std::uint64_t seed);

struct ClientResult {
  int client = 0;
  std::size_t samples = 0;
  double test_accuracy = 0.0;
  double test_loss = 0.0;
};

struct IsolatedRun {
  std::vector<ClientResult> clients;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // population
};

IsolatedRun run_isolated(const EmbeddingDataset& train, const PartitionSpec& partition,
                         const EmbeddingDataset& test, int epochs, const LocalTrainConfig& local,
                         std::uint64_t seed, int threads = 1);

}  // namespace silofl
