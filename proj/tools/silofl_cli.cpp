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

// silofl command-line front end. Links only the C API.

#include <cinttypes>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "silofl/silofl.h"

namespace {

int report_failure(sfl_status status) {
  std::fprintf(stderr, "silofl: %s: %s\n", sfl_status_name(status), sfl_last_error());
  return sfl_exit_code(status);
}

// "[TAG=]VALUE" -> (tag, value)
std::pair<std::string, std::string> split_tag(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) return {"", arg};
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

struct Experiment {
  sfl_experiment* handle = nullptr;
  ~Experiment() { sfl_experiment_destroy(handle); }
};

struct Dedup {
  sfl_dedup* handle = nullptr;
  ~Dedup() { sfl_dedup_destroy(handle); }
};

sfl_status open_experiment(const std::string& config, const std::string& out, int threads,
                           const std::vector<std::uint64_t>& seeds, Experiment& exp) {
  sfl_status st = sfl_experiment_load(config.c_str(), &exp.handle);
  if (st != SFL_OK) return st;
  if (!out.empty() && (st = sfl_experiment_set_output(exp.handle, out.c_str())) != SFL_OK) return st;
  if (threads > 0 && (st = sfl_experiment_set_threads(exp.handle, threads)) != SFL_OK) return st;
  return sfl_experiment_set_seeds(exp.handle, seeds.data(), seeds.size());
}

int cmd_dedup(const std::vector<std::string>& roots, const std::vector<std::string>& coco,
              int threshold, const std::string& out, const std::vector<std::string>& labels,
              const std::vector<std::string>& maps, int threads) {
  Dedup d;
  sfl_status st = sfl_dedup_create(&d.handle);
  if (st != SFL_OK) return report_failure(st);
  for (const auto& r : roots) {
    const auto [tag, dir] = split_tag(r);
    if ((st = sfl_dedup_add_root(d.handle, dir.c_str(), tag.c_str())) != SFL_OK) return report_failure(st);
  }
  for (const auto& c : coco) {
    const auto [tag, rest] = split_tag(c);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) {
      std::fprintf(stderr, "silofl: --coco expects [SOURCE=]MANIFEST,IMAGES_ROOT, got '%s'\n", c.c_str());
      return 2;
    }
    st = sfl_dedup_add_coco(d.handle, rest.substr(0, comma).c_str(), rest.substr(comma + 1).c_str(),
                            tag.c_str());
    if (st != SFL_OK) return report_failure(st);
  }
  if (!labels.empty()) {
    std::vector<const char*> ptrs;
    for (const auto& l : labels) ptrs.push_back(l.c_str());
    if ((st = sfl_dedup_set_labels(d.handle, ptrs.data(), ptrs.size())) != SFL_OK) return report_failure(st);
  }
  for (const auto& m : maps) {
    const auto [name, label] = split_tag(m);
    if (name.empty()) {
      std::fprintf(stderr, "silofl: --map expects NAME=LABEL, got '%s'\n", m.c_str());
      return 2;
    }
    if ((st = sfl_dedup_map_label(d.handle, name.c_str(), label.c_str())) != SFL_OK) return report_failure(st);
  }
  if ((st = sfl_dedup_set_threshold(d.handle, threshold)) != SFL_OK) return report_failure(st);
  if ((st = sfl_dedup_set_threads(d.handle, threads)) != SFL_OK) return report_failure(st);
  if ((st = sfl_dedup_set_output(d.handle, out.c_str())) != SFL_OK) return report_failure(st);

  sfl_curation_report report;
  if ((st = sfl_dedup_run(d.handle, &report)) != SFL_OK) return report_failure(st);
  for (size_t i = 0; i < sfl_dedup_warning_count(d.handle); ++i) {
    std::fprintf(stderr, "warning: %s\n", sfl_dedup_warning(d.handle, i));
  }
  std::fputs(sfl_dedup_report_text(d.handle), stdout);
  return 0;
}

void print_summaries(const sfl_experiment* exp, sfl_paradigm paradigm) {
  for (size_t i = 0; i < sfl_experiment_summary_count(exp); ++i) {
    sfl_run_summary s;
    if (sfl_experiment_summary(exp, i, &s) != SFL_OK) continue;
    if (paradigm == SFL_PARADIGM_ISOLATED) {
      std::printf("seed %" PRIu64 ": isolated accuracy %.4f +- %.4f\n", s.seed, s.mean_accuracy, s.std_accuracy);
    } else {
      std::printf("seed %" PRIu64 ": final accuracy %.4f, loss %.4f\n", s.seed, s.final_accuracy, s.final_loss);
    }
  }
  std::printf("metrics: %s\n", sfl_experiment_metrics_path(exp));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-silo federated learning simulator and image-corpus deduplication toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sfl_version()));

  std::string config, out, paradigm_name;
  std::vector<std::uint64_t> seeds;
  int threads = 0;

  auto* dedup = app.add_subcommand("dedup", "Hash, group and deduplicate an image corpus");
  std::vector<std::string> roots, coco, labels, maps;
  int threshold = 5;
  int dedup_threads = 1;
  std::string dedup_out = "out";
  dedup->add_option("--root", roots, "Image directory, optionally tagged SOURCE=DIR");
  dedup->add_option("--coco", coco, "COCO detection manifest: [SOURCE=]MANIFEST,IMAGES_ROOT");
  dedup->add_option("--threshold", threshold, "Max Hamming distance for both hashes")->capture_default_str();
  dedup->add_option("--out", dedup_out, "Output directory")->capture_default_str();
  dedup->add_option("--labels", labels, "Label set (default Healthy,Coccidiosis,NCD,Salmonella)")->delimiter(',');
  dedup->add_option("--map", maps, "Map a directory/category name to a label: NAME=LABEL");
  dedup->add_option("--threads", dedup_threads, "Hashing threads")->capture_default_str();

  auto* part = app.add_subcommand("partition", "Write the Dirichlet client partition");
  part->add_option("--config", config, "Experiment config file")->required();
  part->add_option("--out", out, "Output directory (overrides config)");
  part->add_option("--seeds", seeds, "Seeds to repeat over")->delimiter(',');

  auto* run = app.add_subcommand("run", "Run one training paradigm");
  run->add_option("--config", config, "Experiment config file")->required();
  run->add_option("--paradigm", paradigm_name, "centralized | isolated | federated")->required();
  run->add_option("--out", out, "Output directory (overrides config)");
  run->add_option("--seeds", seeds, "Seeds to repeat over")->delimiter(',');
  run->add_option("--threads", threads, "Worker threads for client training");

  auto* ablate = app.add_subcommand("ablate-rounds", "Federated runs over several round budgets");
  std::vector<int> rounds;
  ablate->add_option("--config", config, "Experiment config file")->required();
  ablate->add_option("--rounds", rounds, "Round budgets, ascending")->delimiter(',')->required();
  ablate->add_option("--out", out, "Output directory (overrides config)");
  ablate->add_option("--seeds", seeds, "Seeds to repeat over")->delimiter(',');
  ablate->add_option("--threads", threads, "Worker threads for client training");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (dedup->parsed()) {
    return cmd_dedup(roots, coco, threshold, dedup_out, labels, maps, dedup_threads);
  }

  Experiment exp;
  sfl_status st = open_experiment(config, out, threads, seeds, exp);
  if (st != SFL_OK) return report_failure(st);

  if (part->parsed()) {
    if ((st = sfl_experiment_partition(exp.handle)) != SFL_OK) return report_failure(st);
    std::printf("partition: %s\n", sfl_experiment_metrics_path(exp.handle));
    return 0;
  }
  if (run->parsed()) {
    sfl_paradigm paradigm;
    if ((st = sfl_paradigm_parse(paradigm_name.c_str(), &paradigm)) != SFL_OK) return report_failure(st);
    if ((st = sfl_experiment_run(exp.handle, paradigm)) != SFL_OK) return report_failure(st);
    print_summaries(exp.handle, paradigm);
    return 0;
  }
  if ((st = sfl_experiment_ablate_rounds(exp.handle, rounds.data(), rounds.size())) != SFL_OK) {
    return report_failure(st);
  }
  for (size_t i = 0; i < sfl_experiment_ablation_count(exp.handle); ++i) {
    sfl_ablation_row r;
    sfl_experiment_ablation_row(exp.handle, i, &r);
    std::printf("seed %" PRIu64 " T=%d: accuracy %.4f, loss %.4f\n", r.seed, r.rounds, r.final_accuracy, r.final_loss);
  }
  std::printf("table: %s\n", sfl_experiment_metrics_path(exp.handle));
  return 0;
}
