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
#include <optional>
#include <string>
#include <vector>

#include "curation.hpp"
#include "datagen.hpp"
#include "federation.hpp"

namespace silofl {

enum class Paradigm { kCentralized, kIsolated, kFederated };

std::string to_string(Paradigm p);
Paradigm parse_paradigm(const std::string& name);

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "file"
  int classes = 4;
  int dim = 64;
  std::size_t samples = 8000;
  double separation = 2.8;
  std::filesystem::path path;  // embedding CSV when source = file
  double test_fraction = 0.2;
};

struct ExperimentConfig {
  std::uint64_t seed = 7;
  int threads = 1;
  std::filesystem::path output_dir = "out";
  DataConfig data;
  FedConfig federation;     // includes partition (clients, alpha) and local
  int baseline_epochs = 20;  // centralized and isolated training length
  bool checkpoint = false;

  void validate() const;
  // Resolved configuration, every defaulted value included.
  std::string to_json() const;
};

// INI-style document with [experiment], [data], [partition], [local],
// [federation] and [baseline] sections. Unknown keys and out-of-range values
// raise Error{kConfig} naming the field.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

struct PreparedData {
  SplitResult split;
  PartitionSpec partition;
};

PreparedData prepare_data(const ExperimentConfig& cfg);

struct RunSummary {
  Paradigm paradigm = Paradigm::kFederated;
  std::uint64_t seed = 0;
  double final_accuracy = 0.0;
  double final_loss = 0.0;
  double mean_accuracy = 0.0;  // isolated only
  double std_accuracy = 0.0;   // isolated only
};

struct RunOutput {
  std::filesystem::path metrics_csv;
  std::filesystem::path summary_json;
  std::vector<RunSummary> summaries;  // one per seed
};

// Runs one paradigm per seed (config seed when `seeds` is empty). Metrics go
// to <output>/metrics_<paradigm>.csv; a seed column is appended when `seeds`
// is given.
RunOutput cmd_run(const ExperimentConfig& cfg, Paradigm paradigm,
                  const std::vector<std::uint64_t>& seeds = {});

struct AblationRow {
  int rounds = 0;
  std::uint64_t seed = 0;
  double final_accuracy = 0.0;
  double final_loss = 0.0;
};

struct AblationOutput {
  std::filesystem::path table_csv;
  std::filesystem::path curve_csv;
  std::vector<AblationRow> rows;
};

AblationOutput cmd_ablate_rounds(const ExperimentConfig& cfg, const std::vector<int>& rounds,
                                 const std::vector<std::uint64_t>& seeds = {});

struct PartitionOutput {
  std::vector<std::filesystem::path> files;
};

PartitionOutput cmd_partition(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds = {});

struct CocoInput {
  std::filesystem::path manifest;
  std::filesystem::path images_root;
  std::string source;
};

struct DedupRequest {
  std::vector<CorpusRoot> roots;
  std::vector<CocoInput> coco;
  int threshold = 5;
  std::filesystem::path output_dir = "out";
  LabelSet labels;
  LabelRule rule;
  int threads = 1;
  bool prefilter = true;
};

struct DedupOutput {
  CurationReport report;
  std::vector<DuplicateGroup> groups;
  std::vector<std::string> warnings;
  std::filesystem::path manifest_csv;
};

// scan/convert -> group -> conflicts -> select -> write. Writes manifest.csv,
// groups.csv, report.txt, report.json and warnings.txt under output_dir.
DedupOutput cmd_dedup(const DedupRequest& req);

}  // namespace silofl
