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

#include "silofl/silofl.h"

#include <cstring>
#include <exception>
#include <memory>
#include <string>
#include <vector>

#include "curation.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "imageio.hpp"

struct sfl_dedup {
  silofl::DedupRequest request;
  silofl::DedupOutput result;
  std::string report_text;
  bool has_result = false;
};

struct sfl_experiment {
  silofl::ExperimentConfig config;
  std::vector<std::uint64_t> seeds;
  std::string config_json;
  std::string metrics_path;
  std::vector<silofl::RunSummary> summaries;
  std::vector<silofl::AblationRow> ablation;
};

namespace {

thread_local std::string g_last_error;

sfl_status fail(sfl_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

sfl_status map_kind(silofl::ErrorKind kind) {
  switch (kind) {
    case silofl::ErrorKind::kInvalidInput: return SFL_ERR_INVALID_ARGUMENT;
    case silofl::ErrorKind::kIo: return SFL_ERR_IO;
    case silofl::ErrorKind::kParse: return SFL_ERR_PARSE;
    case silofl::ErrorKind::kConfig: return SFL_ERR_CONFIG;
    case silofl::ErrorKind::kRuntime: return SFL_ERR_RUNTIME;
  }
  return SFL_ERR_INTERNAL;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
sfl_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return SFL_OK;
  } catch (const silofl::Error& e) {
    return fail(map_kind(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(SFL_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(SFL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SFL_ERR_INTERNAL, "unknown error");
  }
}

#define SFL_REQUIRE_ARG(cond, msg) \
  if (!(cond)) return fail(SFL_ERR_INVALID_ARGUMENT, msg)

void copy_hex(const silofl::Hash256& h, char* dst) {
  const std::string hex = h.to_hex();
  std::memcpy(dst, hex.c_str(), hex.size() + 1);
}

void fill_hashes(const silofl::ImageHashes& h, sfl_hashes* out) {
  copy_hex(h.ahash, out->ahash);
  copy_hex(h.phash, out->phash);
}

sfl_status refresh_config_json(sfl_experiment* exp) {
  return guarded([&] { exp->config_json = exp->config.to_json(); });
}

}  // namespace

extern "C" {

const char* sfl_last_error(void) { return g_last_error.c_str(); }

const char* sfl_status_name(sfl_status status) {
  switch (status) {
    case SFL_OK: return "ok";
    case SFL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SFL_ERR_IO: return "i/o error";
    case SFL_ERR_PARSE: return "parse error";
    case SFL_ERR_CONFIG: return "configuration error";
    case SFL_ERR_RUNTIME: return "runtime error";
    case SFL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

int sfl_exit_code(sfl_status status) {
  switch (status) {
    case SFL_OK: return 0;
    case SFL_ERR_INVALID_ARGUMENT:
    case SFL_ERR_IO:
    case SFL_ERR_PARSE:
    case SFL_ERR_CONFIG: return 2;
    default: return 3;
  }
}

const char* sfl_version(void) { return "1.0.0"; }

sfl_status sfl_hash_rgb(const uint8_t* rgb, int width, int height, sfl_hashes* out) {
  SFL_REQUIRE_ARG(rgb && out, "sfl_hash_rgb: null argument");
  SFL_REQUIRE_ARG(width >= 1 && height >= 1, "sfl_hash_rgb: image dimensions must be positive");
  return guarded([&] {
    const std::size_t n = static_cast<std::size_t>(width) * height * 3;
    fill_hashes(silofl::hash_image({rgb, n}, width, height), out);
  });
}

sfl_status sfl_hash_file(const char* path, sfl_hashes* out, int* width, int* height) {
  SFL_REQUIRE_ARG(path && out, "sfl_hash_file: null argument");
  return guarded([&] {
    const silofl::RgbImage img = silofl::read_image(path);
    fill_hashes(silofl::hash_image(img.pixels, img.width, img.height), out);
    if (width) *width = img.width;
    if (height) *height = img.height;
  });
}

sfl_status sfl_hamming_hex(const char* a, const char* b, int* distance) {
  SFL_REQUIRE_ARG(a && b && distance, "sfl_hamming_hex: null argument");
  return guarded([&] {
    *distance = silofl::hamming(silofl::Hash256::from_hex(a), silofl::Hash256::from_hex(b));
  });
}

sfl_status sfl_dedup_create(sfl_dedup** out) {
  SFL_REQUIRE_ARG(out, "sfl_dedup_create: null argument");
  return guarded([&] { *out = new sfl_dedup(); });
}

void sfl_dedup_destroy(sfl_dedup* dedup) { delete dedup; }

sfl_status sfl_dedup_add_root(sfl_dedup* dedup, const char* dir, const char* source) {
  SFL_REQUIRE_ARG(dedup && dir, "sfl_dedup_add_root: null argument");
  return guarded([&] {
    std::string tag = source && *source ? source
                                        : std::filesystem::path(dir).lexically_normal().filename().string();
    if (tag.empty()) tag = std::filesystem::path(dir).lexically_normal().parent_path().filename().string();
    dedup->request.roots.push_back({dir, tag});
  });
}

sfl_status sfl_dedup_add_coco(sfl_dedup* dedup, const char* manifest, const char* images_root,
                              const char* source) {
  SFL_REQUIRE_ARG(dedup && manifest && images_root, "sfl_dedup_add_coco: null argument");
  return guarded([&] {
    const std::string tag = source && *source ? source : std::filesystem::path(manifest).stem().string();
    dedup->request.coco.push_back({manifest, images_root, tag});
  });
}

sfl_status sfl_dedup_set_labels(sfl_dedup* dedup, const char* const* labels, size_t count) {
  SFL_REQUIRE_ARG(dedup && (labels || count == 0), "sfl_dedup_set_labels: null argument");
  return guarded([&] {
    std::vector<std::string> v;
    for (size_t i = 0; i < count; ++i) {
      silofl::Require(labels[i] != nullptr, "null label");
      v.emplace_back(labels[i]);
    }
    dedup->request.labels = silofl::LabelSet(std::move(v));
  });
}

sfl_status sfl_dedup_map_label(sfl_dedup* dedup, const char* name, const char* label) {
  SFL_REQUIRE_ARG(dedup && name && label, "sfl_dedup_map_label: null argument");
  return guarded([&] { dedup->request.rule.explicit_map[name] = label; });
}

sfl_status sfl_dedup_set_threshold(sfl_dedup* dedup, int threshold) {
  SFL_REQUIRE_ARG(dedup, "sfl_dedup_set_threshold: null handle");
  if (threshold < 0) return fail(SFL_ERR_CONFIG, "threshold must be >= 0");
  dedup->request.threshold = threshold;
  return SFL_OK;
}

sfl_status sfl_dedup_set_threads(sfl_dedup* dedup, int threads) {
  SFL_REQUIRE_ARG(dedup, "sfl_dedup_set_threads: null handle");
  if (threads < 1) return fail(SFL_ERR_CONFIG, "threads must be >= 1");
  dedup->request.threads = threads;
  return SFL_OK;
}

sfl_status sfl_dedup_set_output(sfl_dedup* dedup, const char* dir) {
  SFL_REQUIRE_ARG(dedup && dir, "sfl_dedup_set_output: null argument");
  dedup->request.output_dir = dir;
  return SFL_OK;
}

sfl_status sfl_dedup_run(sfl_dedup* dedup, sfl_curation_report* report) {
  SFL_REQUIRE_ARG(dedup, "sfl_dedup_run: null handle");
  return guarded([&] {
    dedup->has_result = false;
    dedup->result = silofl::cmd_dedup(dedup->request);
    dedup->report_text = dedup->result.report.to_text();
    dedup->has_result = true;
    if (report) {
      const auto& r = dedup->result.report;
      *report = {r.total_raw, r.duplicates_removed, r.reduction_pct, r.conflict_groups, r.unique_remaining};
    }
  });
}

const char* sfl_dedup_report_text(const sfl_dedup* dedup) {
  return dedup && dedup->has_result ? dedup->report_text.c_str() : "";
}

size_t sfl_dedup_warning_count(const sfl_dedup* dedup) {
  return dedup && dedup->has_result ? dedup->result.warnings.size() : 0;
}

const char* sfl_dedup_warning(const sfl_dedup* dedup, size_t index) {
  if (!dedup || !dedup->has_result || index >= dedup->result.warnings.size()) return nullptr;
  return dedup->result.warnings[index].c_str();
}

size_t sfl_dedup_group_count(const sfl_dedup* dedup) {
  return dedup && dedup->has_result ? dedup->result.groups.size() : 0;
}

sfl_status sfl_paradigm_parse(const char* name, sfl_paradigm* out) {
  SFL_REQUIRE_ARG(name && out, "sfl_paradigm_parse: null argument");
  return guarded([&] { *out = static_cast<sfl_paradigm>(silofl::parse_paradigm(name)); });
}

sfl_status sfl_experiment_load(const char* config_path, sfl_experiment** out) {
  SFL_REQUIRE_ARG(config_path && out, "sfl_experiment_load: null argument");
  *out = nullptr;
  return guarded([&] {
    auto exp = std::make_unique<sfl_experiment>();
    exp->config = silofl::load_config(config_path);
    exp->config_json = exp->config.to_json();
    *out = exp.release();
  });
}

sfl_status sfl_experiment_parse(const char* config_text, sfl_experiment** out) {
  SFL_REQUIRE_ARG(config_text && out, "sfl_experiment_parse: null argument");
  *out = nullptr;
  return guarded([&] {
    auto exp = std::make_unique<sfl_experiment>();
    exp->config = silofl::parse_config(config_text);
    exp->config.validate();
    exp->config_json = exp->config.to_json();
    *out = exp.release();
  });
}

void sfl_experiment_destroy(sfl_experiment* exp) { delete exp; }

sfl_status sfl_experiment_set_output(sfl_experiment* exp, const char* dir) {
  SFL_REQUIRE_ARG(exp && dir, "sfl_experiment_set_output: null argument");
  exp->config.output_dir = dir;
  return refresh_config_json(exp);
}

sfl_status sfl_experiment_set_threads(sfl_experiment* exp, int threads) {
  SFL_REQUIRE_ARG(exp, "sfl_experiment_set_threads: null handle");
  if (threads < 1) return fail(SFL_ERR_CONFIG, "experiment.threads must be >= 1");
  exp->config.threads = threads;
  exp->config.federation.threads = threads;
  return refresh_config_json(exp);
}

sfl_status sfl_experiment_set_seeds(sfl_experiment* exp, const uint64_t* seeds, size_t count) {
  SFL_REQUIRE_ARG(exp && (seeds || count == 0), "sfl_experiment_set_seeds: null argument");
  exp->seeds.assign(seeds, seeds + count);
  return SFL_OK;
}

const char* sfl_experiment_config_json(const sfl_experiment* exp) {
  return exp ? exp->config_json.c_str() : "";
}

sfl_status sfl_experiment_run(sfl_experiment* exp, sfl_paradigm paradigm) {
  SFL_REQUIRE_ARG(exp, "sfl_experiment_run: null handle");
  SFL_REQUIRE_ARG(paradigm >= SFL_PARADIGM_CENTRALIZED && paradigm <= SFL_PARADIGM_FEDERATED,
                  "sfl_experiment_run: unknown paradigm");
  return guarded([&] {
    const auto out = silofl::cmd_run(exp->config, static_cast<silofl::Paradigm>(paradigm), exp->seeds);
    exp->metrics_path = out.metrics_csv.string();
    exp->summaries = out.summaries;
    exp->ablation.clear();
  });
}

sfl_status sfl_experiment_ablate_rounds(sfl_experiment* exp, const int* rounds, size_t count) {
  SFL_REQUIRE_ARG(exp && (rounds || count == 0), "sfl_experiment_ablate_rounds: null argument");
  return guarded([&] {
    const auto out = silofl::cmd_ablate_rounds(exp->config, std::vector<int>(rounds, rounds + count), exp->seeds);
    exp->metrics_path = out.table_csv.string();
    exp->ablation = out.rows;
    exp->summaries.clear();
  });
}

sfl_status sfl_experiment_partition(sfl_experiment* exp) {
  SFL_REQUIRE_ARG(exp, "sfl_experiment_partition: null handle");
  return guarded([&] {
    const auto out = silofl::cmd_partition(exp->config, exp->seeds);
    exp->metrics_path = out.files.front().string();
  });
}

const char* sfl_experiment_metrics_path(const sfl_experiment* exp) {
  return exp ? exp->metrics_path.c_str() : "";
}

size_t sfl_experiment_summary_count(const sfl_experiment* exp) {
  return exp ? exp->summaries.size() : 0;
}

sfl_status sfl_experiment_summary(const sfl_experiment* exp, size_t index, sfl_run_summary* out) {
  SFL_REQUIRE_ARG(exp && out, "sfl_experiment_summary: null argument");
  SFL_REQUIRE_ARG(index < exp->summaries.size(), "sfl_experiment_summary: index out of range");
  const auto& s = exp->summaries[index];
  *out = {s.seed, s.final_accuracy, s.final_loss, s.mean_accuracy, s.std_accuracy};
  return SFL_OK;
}

size_t sfl_experiment_ablation_count(const sfl_experiment* exp) {
  return exp ? exp->ablation.size() : 0;
}

sfl_status sfl_experiment_ablation_row(const sfl_experiment* exp, size_t index, sfl_ablation_row* out) {
  SFL_REQUIRE_ARG(exp && out, "sfl_experiment_ablation_row: null argument");
  SFL_REQUIRE_ARG(index < exp->ablation.size(), "sfl_experiment_ablation_row: index out of range");
  const auto& r = exp->ablation[index];
  *out = {r.rounds, r.seed, r.final_accuracy, r.final_loss};
  return SFL_OK;
}

}  // extern "C"
