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

#include "experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "error.hpp"
#include "util.hpp"

namespace silofl {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using nlohmann::ordered_json;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"experiment", {"seed", "threads", "output"}},
      {"data", {"source", "classes", "dim", "samples", "separation", "path", "test_fraction"}},
      {"partition", {"clients", "alpha"}},
      {"local", {"epochs", "batch_size", "lr"}},
      {"federation", {"strategy", "rounds", "fraction", "server_lr", "beta1", "beta2", "tau", "checkpoint"}},
      {"baseline", {"epochs"}},
  };
  return keys;
}

template <typename T>
void read_value(const pt::ptree& section, const std::string& name, const std::string& key, T& out) {
  const auto v = section.get_optional<std::string>(key);
  if (!v) return;
  std::string s = *v;
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t") + 1);
  if constexpr (std::is_same_v<T, std::string>) {
    out = s;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (s == "true" || s == "1" || s == "yes") {
      out = true;
    } else if (s == "false" || s == "0" || s == "no") {
      out = false;
    } else {
      Throw(ErrorKind::kConfig, name + "." + key + ": expected true/false, got '" + s + "'");
    }
  } else {
    if (!parse_number(s, out)) {
      Throw(ErrorKind::kConfig, name + "." + key + ": invalid number '" + s + "'");
    }
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) Throw(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) Throw(ErrorKind::kIo, "write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Throw(ErrorKind::kIo, "cannot create output directory " + dir.string() + ": " + ec.message());
}

std::vector<std::uint64_t> seed_list(const ExperimentConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  return seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : seeds;
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(ids[i]);
  }
  return s;
}

const char* kFederatedHeader = "round,strategy,participants,test_accuracy,test_loss,params_transmitted";

void append_federated_rows(std::ostream& os, const FederatedRun& run, Strategy strategy,
                           const std::optional<std::uint64_t>& seed) {
  for (const auto& r : run.rounds) {
    os << r.round << ',' << to_string(strategy) << ',' << join_ids(r.participants) << ','
       << format_double(r.test_accuracy) << ',' << format_double(r.test_loss) << ','
       << r.params_transmitted;
    if (seed) os << ',' << *seed;
    os << '\n';
  }
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string to_string(Paradigm p) {
  switch (p) {
    case Paradigm::kCentralized: return "centralized";
    case Paradigm::kIsolated: return "isolated";
    case Paradigm::kFederated: return "federated";
  }
  return "?";
}

Paradigm parse_paradigm(const std::string& name) {
  if (name == "centralized") return Paradigm::kCentralized;
  if (name == "isolated") return Paradigm::kIsolated;
  if (name == "federated") return Paradigm::kFederated;
  Throw(ErrorKind::kConfig, "paradigm: expected centralized, isolated or federated, got '" + name + "'");
}

void ExperimentConfig::validate() const {
  if (threads < 1) Throw(ErrorKind::kConfig, "experiment.threads must be >= 1");
  if (data.source == "synthetic") {
    if (data.classes < 2) Throw(ErrorKind::kConfig, "data.classes must be >= 2");
    if (data.dim < data.classes) Throw(ErrorKind::kConfig, "data.dim must be >= data.classes");
    if (data.samples < static_cast<std::size_t>(data.classes)) {
      Throw(ErrorKind::kConfig, "data.samples must be >= data.classes");
    }
    if (!std::isfinite(data.separation)) Throw(ErrorKind::kConfig, "data.separation must be finite");
  } else if (data.source == "file") {
    if (data.path.empty()) Throw(ErrorKind::kConfig, "data.path is required when data.source = file");
    if (!fs::exists(data.path)) Throw(ErrorKind::kConfig, "data.path: file not found: " + data.path.string());
    if (data.classes < 1) Throw(ErrorKind::kConfig, "data.classes must be >= 1");
  } else {
    Throw(ErrorKind::kConfig, "data.source: expected synthetic or file, got '" + data.source + "'");
  }
  if (!(data.test_fraction > 0.0 && data.test_fraction < 1.0)) {
    Throw(ErrorKind::kConfig, "data.test_fraction must be in (0, 1)");
  }
  if (baseline_epochs < 0) Throw(ErrorKind::kConfig, "baseline.epochs must be >= 0");
  federation.validate();
}

std::string ExperimentConfig::to_json() const {
  ordered_json j;
  j["experiment"] = {{"seed", seed}, {"threads", threads}, {"output", output_dir.generic_string()}};
  ordered_json d;
  d["source"] = data.source;
  d["classes"] = data.classes;
  d["dim"] = data.dim;
  d["samples"] = data.samples;
  d["separation"] = data.separation;
  d["path"] = data.path.generic_string();
  d["test_fraction"] = data.test_fraction;
  j["data"] = d;
  j["partition"] = {{"clients", federation.num_clients}, {"alpha", federation.alpha}};
  j["local"] = {{"epochs", federation.local.epochs},
                {"batch_size", federation.local.batch_size},
                {"lr", federation.local.lr}};
  ordered_json f;
  f["strategy"] = to_string(federation.strategy);
  f["rounds"] = federation.rounds;
  f["fraction"] = federation.fraction;
  f["server_lr"] = federation.adam.eta;
  f["beta1"] = federation.adam.beta1;
  f["beta2"] = federation.adam.beta2;
  f["tau"] = federation.adam.tau;
  f["checkpoint"] = checkpoint;
  j["federation"] = f;
  j["baseline"] = {{"epochs", baseline_epochs}};
  return j.dump(2);
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    Throw(ErrorKind::kConfig, "config line " + std::to_string(e.line()) + ": " + e.message());
  }

  const auto& keys = known_keys();
  for (const auto& [section, body] : tree) {
    auto it = keys.find(section);
    if (it == keys.end()) Throw(ErrorKind::kConfig, "unknown config section [" + section + "]");
    if (!body.data().empty()) Throw(ErrorKind::kConfig, "key '" + section + "' must be inside a section");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) Throw(ErrorKind::kConfig, "unknown config field " + section + "." + key);
    }
  }

  ExperimentConfig cfg;
  const pt::ptree empty;
  auto section = [&](const char* name) -> const pt::ptree& {
    auto child = tree.get_child_optional(name);
    return child ? *child : empty;
  };

  const auto& ex = section("experiment");
  read_value(ex, "experiment", "seed", cfg.seed);
  read_value(ex, "experiment", "threads", cfg.threads);
  std::string output = cfg.output_dir.string();
  read_value(ex, "experiment", "output", output);
  cfg.output_dir = output;

  const auto& data = section("data");
  read_value(data, "data", "source", cfg.data.source);
  read_value(data, "data", "classes", cfg.data.classes);
  read_value(data, "data", "dim", cfg.data.dim);
  read_value(data, "data", "samples", cfg.data.samples);
  read_value(data, "data", "separation", cfg.data.separation);
  std::string path;
  read_value(data, "data", "path", path);
  cfg.data.path = path;
  read_value(data, "data", "test_fraction", cfg.data.test_fraction);

  const auto& part = section("partition");
  read_value(part, "partition", "clients", cfg.federation.num_clients);
  read_value(part, "partition", "alpha", cfg.federation.alpha);

  const auto& local = section("local");
  read_value(local, "local", "epochs", cfg.federation.local.epochs);
  read_value(local, "local", "batch_size", cfg.federation.local.batch_size);
  read_value(local, "local", "lr", cfg.federation.local.lr);

  const auto& fed = section("federation");
  std::string strategy = to_string(cfg.federation.strategy);
  read_value(fed, "federation", "strategy", strategy);
  cfg.federation.strategy = parse_strategy(strategy);
  read_value(fed, "federation", "rounds", cfg.federation.rounds);
  read_value(fed, "federation", "fraction", cfg.federation.fraction);
  read_value(fed, "federation", "server_lr", cfg.federation.adam.eta);
  read_value(fed, "federation", "beta1", cfg.federation.adam.beta1);
  read_value(fed, "federation", "beta2", cfg.federation.adam.beta2);
  read_value(fed, "federation", "tau", cfg.federation.adam.tau);
  read_value(fed, "federation", "checkpoint", cfg.checkpoint);

  read_value(section("baseline"), "baseline", "epochs", cfg.baseline_epochs);

  cfg.federation.seed = cfg.seed;
  cfg.federation.threads = cfg.threads;
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Throw(ErrorKind::kConfig, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig cfg = parse_config(ss.str());
  const fs::path base = path.parent_path();
  if (!cfg.data.path.empty() && cfg.data.path.is_relative()) cfg.data.path = base / cfg.data.path;
  cfg.validate();
  return cfg;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  EmbeddingDataset ds;
  if (cfg.data.source == "synthetic") {
    ds = synth_embeddings(cfg.data.classes, cfg.data.dim, cfg.data.samples, cfg.data.separation, cfg.seed);
  } else {
    ds = load_embeddings(cfg.data.path, cfg.data.classes);
  }
  PreparedData out;
  out.split = stratified_split(ds, cfg.data.test_fraction, cfg.seed);
  if (out.split.train.size() < static_cast<std::size_t>(cfg.federation.num_clients)) {
    Throw(ErrorKind::kConfig, "partition.clients exceeds the number of training samples");
  }
  out.partition = dirichlet_partition(out.split.train.labels, cfg.federation.num_clients,
                                      cfg.federation.alpha, cfg.seed);
  return out;
}

RunOutput cmd_run(const ExperimentConfig& base, Paradigm paradigm,
                  const std::vector<std::uint64_t>& seeds) {
  base.validate();
  const auto start = std::chrono::steady_clock::now();
  ensure_dir(base.output_dir);
  const bool seed_column = !seeds.empty();

  RunOutput out;
  out.metrics_csv = base.output_dir / ("metrics_" + to_string(paradigm) + ".csv");
  out.summary_json = base.output_dir / ("summary_" + to_string(paradigm) + ".json");

  std::ostringstream csv;
  switch (paradigm) {
    case Paradigm::kFederated: csv << kFederatedHeader; break;
    case Paradigm::kCentralized: csv << "epoch,test_accuracy,test_loss"; break;
    case Paradigm::kIsolated: csv << "client,samples,test_accuracy,test_loss"; break;
  }
  csv << (seed_column ? ",seed\n" : "\n");

  ordered_json runs = ordered_json::array();
  for (std::uint64_t seed : seed_list(base, seeds)) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    cfg.federation.seed = seed;
    cfg.federation.threads = cfg.threads;
    const PreparedData data = prepare_data(cfg);
    const std::optional<std::uint64_t> tag = seed_column ? std::optional(seed) : std::nullopt;
    RunSummary s{paradigm, seed};
    ordered_json js;
    js["seed"] = seed;

    if (paradigm == Paradigm::kFederated) {
      CheckpointFn ckpt;
      if (cfg.checkpoint) {
        const fs::path dir = cfg.output_dir / "checkpoints";
        ensure_dir(dir);
        ckpt = [dir, seed](int round, const HeadParams& p) {
          write_head(p, dir / ("seed" + std::to_string(seed) + "_round" + std::to_string(round) + ".csv"));
        };
      }
      const FederatedRun run = run_federated(cfg.federation, data.split.train, data.partition,
                                             data.split.test, ckpt);
      append_federated_rows(csv, run, cfg.federation.strategy, tag);
      s.final_accuracy = run.rounds.back().test_accuracy;
      s.final_loss = run.rounds.back().test_loss;
    } else if (paradigm == Paradigm::kCentralized) {
      const CentralizedRun run = run_centralized(data.split.train, data.split.test, cfg.baseline_epochs,
                                                 cfg.federation.local, seed);
      for (const auto& e : run.epochs) {
        csv << e.epoch << ',' << format_double(e.test_accuracy) << ',' << format_double(e.test_loss);
        if (tag) csv << ',' << *tag;
        csv << '\n';
      }
      s.final_accuracy = run.epochs.back().test_accuracy;
      s.final_loss = run.epochs.back().test_loss;
    } else {
      const IsolatedRun run = run_isolated(data.split.train, data.partition, data.split.test,
                                           cfg.baseline_epochs, cfg.federation.local, seed, cfg.threads);
      for (const auto& c : run.clients) {
        csv << c.client << ',' << c.samples << ',' << format_double(c.test_accuracy) << ','
            << format_double(c.test_loss);
        if (tag) csv << ',' << *tag;
        csv << '\n';
      }
      s.mean_accuracy = run.mean_accuracy;
      s.std_accuracy = run.std_accuracy;
      js["mean_accuracy"] = s.mean_accuracy;
      js["std_accuracy"] = s.std_accuracy;
    }
    if (paradigm != Paradigm::kIsolated) {
      js["final_accuracy"] = s.final_accuracy;
      js["final_loss"] = s.final_loss;
    }
    runs.push_back(js);
    out.summaries.push_back(s);
  }

  write_text(out.metrics_csv, csv.str());
  write_text(base.output_dir / "config_resolved.json", base.to_json() + "\n");

  ordered_json summary;
  summary["paradigm"] = to_string(paradigm);
  summary["config"] = ordered_json::parse(base.to_json());
  summary["metrics_csv"] = out.metrics_csv.filename().string();
  summary["runs"] = runs;
  summary["wall_clock_seconds"] = elapsed_seconds(start);
  write_text(out.summary_json, summary.dump(2) + "\n");
  return out;
}

AblationOutput cmd_ablate_rounds(const ExperimentConfig& base, const std::vector<int>& rounds,
                                 const std::vector<std::uint64_t>& seeds) {
  base.validate();
  if (rounds.empty()) Throw(ErrorKind::kConfig, "rounds list must not be empty");
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    if (rounds[i] < 1) Throw(ErrorKind::kConfig, "rounds must be >= 1");
    if (i > 0 && rounds[i] <= rounds[i - 1]) Throw(ErrorKind::kConfig, "rounds list must be strictly ascending");
  }
  const auto start = std::chrono::steady_clock::now();
  ensure_dir(base.output_dir);
  const bool seed_column = !seeds.empty();

  AblationOutput out;
  out.table_csv = base.output_dir / "ablation.csv";
  out.curve_csv = base.output_dir / ("ablation_curve_T" + std::to_string(rounds.back()) + ".csv");
  std::ostringstream table, curve;
  table << "rounds,final_accuracy,final_loss" << (seed_column ? ",seed\n" : "\n");
  curve << kFederatedHeader << (seed_column ? ",seed\n" : "\n");

  for (std::uint64_t seed : seed_list(base, seeds)) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    cfg.federation.seed = seed;
    cfg.federation.threads = cfg.threads;
    const PreparedData data = prepare_data(cfg);
    for (int t : rounds) {
      cfg.federation.rounds = t;
      const FederatedRun run = run_federated(cfg.federation, data.split.train, data.partition, data.split.test);
      const AblationRow row{t, seed, run.rounds.back().test_accuracy, run.rounds.back().test_loss};
      out.rows.push_back(row);
      table << t << ',' << format_double(row.final_accuracy) << ',' << format_double(row.final_loss);
      if (seed_column) table << ',' << seed;
      table << '\n';
      if (t == rounds.back()) {
        append_federated_rows(curve, run, cfg.federation.strategy,
                              seed_column ? std::optional(seed) : std::nullopt);
      }
    }
  }

  write_text(out.table_csv, table.str());
  write_text(out.curve_csv, curve.str());
  write_text(base.output_dir / "config_resolved.json", base.to_json() + "\n");
  ordered_json summary;
  summary["config"] = ordered_json::parse(base.to_json());
  summary["rounds"] = rounds;
  summary["table_csv"] = out.table_csv.filename().string();
  summary["curve_csv"] = out.curve_csv.filename().string();
  summary["wall_clock_seconds"] = elapsed_seconds(start);
  write_text(base.output_dir / "summary_ablation.json", summary.dump(2) + "\n");
  return out;
}

PartitionOutput cmd_partition(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds) {
  base.validate();
  ensure_dir(base.output_dir);
  PartitionOutput out;
  std::ostringstream counts;
  counts << "client,class,count" << (seeds.empty() ? "\n" : ",seed\n");
  for (std::uint64_t seed : seed_list(base, seeds)) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    const PreparedData data = prepare_data(cfg);
    const fs::path file = cfg.output_dir / (seeds.empty() ? std::string("partition.csv")
                                                          : "partition_seed" + std::to_string(seed) + ".csv");
    write_partition(data.partition, file);
    out.files.push_back(file);
    for (int k = 0; k < data.partition.num_clients; ++k) {
      std::vector<std::size_t> per_class(static_cast<std::size_t>(data.split.train.num_classes), 0);
      for (std::size_t i : data.partition.client_indices(k)) ++per_class[data.split.train.labels[i]];
      for (std::size_t c = 0; c < per_class.size(); ++c) {
        counts << k << ',' << c << ',' << per_class[c];
        if (!seeds.empty()) counts << ',' << seed;
        counts << '\n';
      }
    }
  }
  const fs::path counts_file = base.output_dir / "partition_counts.csv";
  write_text(counts_file, counts.str());
  out.files.push_back(counts_file);
  write_text(base.output_dir / "config_resolved.json", base.to_json() + "\n");
  return out;
}

DedupOutput cmd_dedup(const DedupRequest& req) {
  if (req.threshold < 0) Throw(ErrorKind::kConfig, "threshold must be >= 0");
  IngestResult ingest = scan_corpus(req.roots, req.rule, req.labels, req.threads);
  for (const auto& c : req.coco) {
    IngestResult more = coco_to_classification(c.manifest, c.images_root, c.source, req.rule, req.labels);
    ingest.records.insert(ingest.records.end(), more.records.begin(), more.records.end());
    ingest.warnings.insert(ingest.warnings.end(), more.warnings.begin(), more.warnings.end());
  }
  std::sort(ingest.records.begin(), ingest.records.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < ingest.records.size(); ++i) {
    if (ingest.records[i].id == ingest.records[i - 1].id) {
      Throw(ErrorKind::kConfig, "record id '" + ingest.records[i].id +
                                    "' appears in two inputs; give each input a distinct source tag");
    }
  }

  DedupOutput out;
  out.groups = group_duplicates(ingest.records, req.threshold, req.prefilter);
  const CurationOutcome curated = select_representatives(out.groups, ingest.records);
  out.report = curated.report;
  out.warnings = std::move(ingest.warnings);

  // Post-conditions of the pipeline; a failure here is a bug, not bad input.
  const auto& m = curated.manifest;
  const CurationReport& r = out.report;
  if (r.unique_remaining != r.total_raw - r.duplicates_removed ||
      r.unique_remaining != static_cast<long long>(m.size())) {
    Throw(ErrorKind::kRuntime, "curation report arithmetic is inconsistent");
  }
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      if (is_duplicate_pair(m[i], m[j], req.threshold)) {
        Throw(ErrorKind::kRuntime, "curated manifest still holds duplicates " + m[i].id + " and " + m[j].id);
      }
    }
  }

  ensure_dir(req.output_dir);
  out.manifest_csv = req.output_dir / "manifest.csv";
  write_manifest(m, out.manifest_csv);

  std::ostringstream groups;
  groups << "group,member,representative,label_conflict\n";
  for (std::size_t g = 0; g < out.groups.size(); ++g) {
    for (const auto& id : out.groups[g].members) {
      groups << g << ',' << csv_escape(id) << ',' << (id == out.groups[g].representative ? 1 : 0) << ','
             << (out.groups[g].label_conflict ? 1 : 0) << '\n';
    }
  }
  write_text(req.output_dir / "groups.csv", groups.str());
  write_text(req.output_dir / "report.txt", r.to_text());
  write_text(req.output_dir / "report.json", r.to_json());
  std::string warn;
  for (const auto& w : out.warnings) warn += w + "\n";
  write_text(req.output_dir / "warnings.txt", warn);
  return out;
}

}  // namespace silofl
