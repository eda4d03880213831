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

#include "federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "error.hpp"

namespace silofl {

namespace {

int participant_count(int num_clients, double fraction) {
  return static_cast<int>(std::llround(fraction * num_clients));
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index writes
// only its own slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(threads, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Weighted {
  std::vector<ClientUpdate> updates;
  std::vector<double> weights;
};

Weighted normalize(std::vector<ClientUpdate> updates) {
  Require(!updates.empty(), "aggregation needs at least one client update");
  std::sort(updates.begin(), updates.end(),
            [](const ClientUpdate& a, const ClientUpdate& b) { return a.client < b.client; });
  std::size_t total = 0;
  for (const auto& u : updates) {
    Require(u.params.same_shape(updates.front().params), "client update shape mismatch");
    total += u.samples;
  }
  Require(total > 0, "aggregation weights are all zero");
  Weighted w{std::move(updates), {}};
  for (const auto& u : w.updates) w.weights.push_back(static_cast<double>(u.samples) / total);
  return w;
}

// sum_k w_k (x_k - anchor), reduced in client-id order.
HeadParams weighted_delta(const Weighted& w, const HeadParams& anchor) {
  HeadParams delta(anchor.num_classes(), anchor.dim());
  auto d = delta.flat();
  const auto a = anchor.flat();
  for (std::size_t k = 0; k < w.updates.size(); ++k) {
    const auto x = w.updates[k].params.flat();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += w.weights[k] * (x[i] - a[i]);
  }
  return delta;
}

}  // namespace

std::string to_string(Strategy s) { return s == Strategy::kFedAvg ? "fedavg" : "fedadam"; }

Strategy parse_strategy(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "fedavg") return Strategy::kFedAvg;
  if (n == "fedadam") return Strategy::kFedAdam;
  Throw(ErrorKind::kConfig, "federation.strategy: unknown strategy '" + name + "'");
}

void FedConfig::validate() const {
  if (num_clients < 1) Throw(ErrorKind::kConfig, "partition.clients must be >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) Throw(ErrorKind::kConfig, "federation.fraction must be in (0, 1]");
  if (participant_count(num_clients, fraction) < 1) {
    Throw(ErrorKind::kConfig, "federation.fraction selects zero clients");
  }
  if (rounds < 1) Throw(ErrorKind::kConfig, "federation.rounds must be >= 1");
  if (!(alpha > 0.0)) Throw(ErrorKind::kConfig, "partition.alpha must be > 0");
  if (!(adam.eta > 0.0)) Throw(ErrorKind::kConfig, "federation.server_lr must be > 0");
  if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0)) Throw(ErrorKind::kConfig, "federation.beta1 must be in (0, 1)");
  if (!(adam.beta2 > 0.0 && adam.beta2 < 1.0)) Throw(ErrorKind::kConfig, "federation.beta2 must be in (0, 1)");
  if (!(adam.tau > 0.0)) Throw(ErrorKind::kConfig, "federation.tau must be > 0");
  if (threads < 1) Throw(ErrorKind::kConfig, "run.threads must be >= 1");
  local.validate();
}

ServerOptState ServerOptState::initial(int num_classes, int dim, double tau) {
  ServerOptState s{HeadParams(num_classes, dim), HeadParams(num_classes, dim)};
  for (double& v : s.v.flat()) v = tau * tau;
  return s;
}

std::vector<int> sample_clients(int num_clients, double fraction, std::uint64_t seed, int round) {
  const int m = participant_count(num_clients, fraction);
  if (num_clients < 1 || m < 1 || m > num_clients) {
    Throw(ErrorKind::kConfig, "client fraction " + std::to_string(fraction) + " of " +
                                  std::to_string(num_clients) + " clients selects no valid set");
  }
  RngStream rng(seed, stream::kClientSampling, 0, static_cast<std::uint64_t>(round));
  std::vector<int> ids(static_cast<std::size_t>(num_clients));
  std::iota(ids.begin(), ids.end(), 0);
  // Partial Fisher-Yates: the first m slots are a uniform m-subset.
  for (int i = 0; i < m; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(num_clients - i)));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(static_cast<std::size_t>(m));
  std::sort(ids.begin(), ids.end());
  return ids;
}

HeadParams fedavg_aggregate(std::vector<ClientUpdate> updates) {
  const Weighted w = normalize(std::move(updates));
  const HeadParams& anchor = w.updates.front().params;
  HeadParams out = anchor + weighted_delta(w, anchor);
  // Keep each coordinate inside the clients' range despite rounding.
  auto o = out.flat();
  for (std::size_t i = 0; i < o.size(); ++i) {
    double lo = anchor.flat()[i], hi = lo;
    for (const auto& u : w.updates) {
      lo = std::min(lo, u.params.flat()[i]);
      hi = std::max(hi, u.params.flat()[i]);
    }
    o[i] = std::clamp(o[i], lo, hi);
  }
  return out;
}

FedAdamResult fedadam_step(const ServerOptState& state, const HeadParams& global,
                           std::vector<ClientUpdate> updates, const FedAdamParams& hp) {
  const Weighted w = normalize(std::move(updates));
  Require(w.updates.front().params.same_shape(global), "client update shape differs from global");
  Require(state.m.same_shape(global) && state.v.same_shape(global), "optimizer state shape mismatch");
  const HeadParams delta = weighted_delta(w, global);

  FedAdamResult out{global, state};
  auto x = out.params.flat();
  auto m = out.state.m.flat();
  auto v = out.state.v.flat();
  const auto d = delta.flat();
  for (std::size_t i = 0; i < x.size(); ++i) {
    m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * d[i];
    v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * d[i] * d[i];
    x[i] += hp.eta * m[i] / (std::sqrt(v[i]) + hp.tau);
  }
  return out;
}

FederatedRun run_federated(const FedConfig& cfg, const EmbeddingDataset& train,
                           const PartitionSpec& partition, const EmbeddingDataset& test,
                           const CheckpointFn& checkpoint) {
  cfg.validate();
  Require(!test.empty(), "test set is empty");
  if (partition.assignment.size() != train.size()) {
    Throw(ErrorKind::kConfig, "partition does not cover the training set");
  }
  if (partition.num_clients != cfg.num_clients) {
    Throw(ErrorKind::kConfig, "partition client count differs from federation config");
  }

  std::vector<EmbeddingDataset> shards;
  for (int k = 0; k < cfg.num_clients; ++k) {
    const auto idx = partition.client_indices(k);
    if (idx.empty()) Throw(ErrorKind::kConfig, "client " + std::to_string(k) + " has an empty shard");
    shards.push_back(train.subset(idx));
  }

  const int classes = train.num_classes;
  const int dim = train.dim;
  const long long head_size = static_cast<long long>(classes) * dim + classes;

  FederatedRun run{{}, HeadParams(classes, dim)};
  HeadParams& global = run.final_params;
  ServerOptState opt = ServerOptState::initial(classes, dim, cfg.adam.tau);

  for (int t = 1; t <= cfg.rounds; ++t) {
    const std::vector<int> selected = sample_clients(cfg.num_clients, cfg.fraction, cfg.seed, t);
    std::vector<ClientUpdate> updates(selected.size());
    parallel_for(selected.size(), cfg.threads, [&](std::size_t i) {
      const int k = selected[i];
      RngStream rng(cfg.seed, stream::kLocalTrain, static_cast<std::uint64_t>(k),
                    static_cast<std::uint64_t>(t));
      const EmbeddingDataset& shard = shards[static_cast<std::size_t>(k)];
      updates[i] = ClientUpdate{k, local_train(global, shard, cfg.local, rng), shard.size()};
    });

    if (cfg.strategy == Strategy::kFedAvg) {
      global = fedavg_aggregate(std::move(updates));
    } else {
      FedAdamResult r = fedadam_step(opt, global, std::move(updates), cfg.adam);
      global = std::move(r.params);
      opt = std::move(r.state);
    }
    if (!global.all_finite()) Throw(ErrorKind::kRuntime, "global parameters diverged in round " + std::to_string(t));

    const EvalResult eval = evaluate(global, test);
    run.rounds.push_back({t, selected, eval.accuracy, eval.loss,
                          2LL * static_cast<long long>(selected.size()) * head_size});
    if (checkpoint) checkpoint(t, global);
  }
  return run;
}

CentralizedRun run_centralized(const EmbeddingDataset& train, const EmbeddingDataset& test,
                               int epochs, const LocalTrainConfig& local, std::uint64_t seed) {
  Require(!train.empty() && !test.empty(), "centralized run needs nonempty train and test sets");
  Require(epochs >= 0, "epochs must be >= 0");
  local.validate();
  LocalTrainConfig one_epoch = local;
  one_epoch.epochs = 1;

  CentralizedRun run{{}, HeadParams(train.num_classes, train.dim)};
  RngStream rng(seed, stream::kLocalTrain, 0, 1);
  EvalResult eval = evaluate(run.final_params, test);
  run.epochs.push_back({0, eval.accuracy, eval.loss});
  for (int e = 1; e <= epochs; ++e) {
    run.final_params = local_train(run.final_params, train, one_epoch, rng);
    eval = evaluate(run.final_params, test);
    run.epochs.push_back({e, eval.accuracy, eval.loss});
  }
  return run;
}

IsolatedRun run_isolated(const EmbeddingDataset& train, const PartitionSpec& partition,
                         const EmbeddingDataset& test, int epochs, const LocalTrainConfig& local,
                         std::uint64_t seed, int threads) {
  Require(!test.empty(), "test set is empty");
  Require(epochs >= 0, "epochs must be >= 0");
  local.validate();
  if (partition.assignment.size() != train.size()) {
    Throw(ErrorKind::kConfig, "partition does not cover the training set");
  }
  std::vector<EmbeddingDataset> shards;
  for (int k = 0; k < partition.num_clients; ++k) {
    const auto idx = partition.client_indices(k);
    if (idx.empty()) Throw(ErrorKind::kConfig, "client " + std::to_string(k) + " has an empty shard");
    shards.push_back(train.subset(idx));
  }

  IsolatedRun run;
  run.clients.resize(shards.size());
  parallel_for(shards.size(), threads, [&](std::size_t k) {
    const EmbeddingDataset& shard = shards[k];
    HeadParams p(train.num_classes, train.dim);
    if (epochs > 0) {
      LocalTrainConfig cfg = local;
      cfg.epochs = epochs;
      RngStream rng(seed, stream::kLocalTrain, k, 1);
      p = local_train(p, shard, cfg, rng);
    }
    const EvalResult eval = evaluate(p, test);
    run.clients[k] = {static_cast<int>(k), shard.size(), eval.accuracy, eval.loss};
  });

  double sum = 0.0;
  for (const auto& c : run.clients) sum += c.test_accuracy;
  run.mean_accuracy = sum / run.clients.size();
  double var = 0.0;
  for (const auto& c : run.clients) var += (c.test_accuracy - run.mean_accuracy) * (c.test_accuracy - run.mean_accuracy);
  run.std_accuracy = std::sqrt(var / run.clients.size());
  return run;
}

}  // namespace silofl
