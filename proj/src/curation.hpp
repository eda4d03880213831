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
#include <map>
#include <string>
#include <vector>

#include "imagehash.hpp"

namespace silofl {

class LabelSet {
 public:
  LabelSet();  // Healthy, Coccidiosis, NCD, Salmonella
  explicit LabelSet(std::vector<std::string> labels);

  bool contains(const std::string& label) const;
  // Case-insensitive lookup; returns the canonical spelling or "".
  std::string canonical(const std::string& name) const;
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
};

// Directory (or COCO category) name -> label. Names not listed fall back to a
// case-insensitive match against the label set.
struct LabelRule {
  std::map<std::string, std::string> explicit_map;

  std::string resolve(const std::string& name, const LabelSet& labels) const;
};

struct ImageRecord {
  std::string id;
  std::string source;
  std::string path;
  std::string label;
  int width = 0;
  int height = 0;
  Hash256 ahash;
  Hash256 phash;

  long long pixel_count() const { return static_cast<long long>(width) * height; }
  ImageHashes hashes() const { return {ahash, phash}; }

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

bool is_duplicate_pair(const ImageRecord& a, const ImageRecord& b, int threshold = 5);

struct DuplicateGroup {
  std::vector<std::string> members;  // sorted ids, size >= 2
  std::string representative;
  bool label_conflict = false;
};

struct CurationReport {
  long long total_raw = 0;
  long long duplicates_removed = 0;
  double reduction_pct = 0.0;
  long long conflict_groups = 0;
  std::map<std::string, double> per_source_duplicate_pct;
  long long unique_remaining = 0;

  std::string to_text() const;
  std::string to_json() const;
};

struct CorpusRoot {
  std::filesystem::path dir;
  std::string source;
};

struct IngestResult {
  std::vector<ImageRecord> records;
  std::vector<std::string> warnings;
};

// Walks each root recursively; a file's label comes from its parent directory
// name. Undecodable or unlabeled files become warnings.
IngestResult scan_corpus(const std::vector<CorpusRoot>& roots, const LabelRule& rule,
                         const LabelSet& labels, int threads = 1);

// One record per bounding box, cropped at the clamped box bounds. Images whose
// boxes span two or more categories contribute nothing.
IngestResult coco_to_classification(const std::filesystem::path& manifest,
                                    const std::filesystem::path& images_root,
                                    const std::string& source, const LabelRule& rule,
                                    const LabelSet& labels);

// Connected components of the duplicate graph (union-find), singletons
// omitted, ordered by smallest member id. `prefilter` restricts comparisons
// to pairs sharing an aHash 16-bit block; only used when threshold < 16.
std::vector<DuplicateGroup> group_duplicates(const std::vector<ImageRecord>& records,
                                             int threshold, bool prefilter = true);

std::vector<DuplicateGroup> detect_label_conflicts(const std::vector<DuplicateGroup>& groups);

struct CurationOutcome {
  std::vector<ImageRecord> manifest;  // sorted by id
  CurationReport report;
};

CurationOutcome select_representatives(const std::vector<DuplicateGroup>& groups,
                                       const std::vector<ImageRecord>& records);

void write_manifest(const std::vector<ImageRecord>& records, const std::filesystem::path& path);
std::vector<ImageRecord> read_manifest(const std::filesystem::path& path);

}  // namespace silofl
