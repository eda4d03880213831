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

#include "curation.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "error.hpp"
#include "imageio.hpp"

namespace silofl {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<int> rank_;
};

std::uint16_t hash_block(const Hash256& h, int block) {
  return static_cast<std::uint16_t>(h.words()[block / 4] >> (48 - 16 * (block % 4)));
}

// Keeps the record with the largest pixel count; ties go to the smallest path.
bool better_representative(const ImageRecord& a, const ImageRecord& b) {
  if (a.pixel_count() != b.pixel_count()) return a.pixel_count() > b.pixel_count();
  if (a.path != b.path) return a.path < b.path;
  return a.id < b.id;
}

std::string fmt_pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

LabelSet::LabelSet() : labels_{"Healthy", "Coccidiosis", "NCD", "Salmonella"} {}

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  Require(!labels_.empty(), "label set must not be empty");
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    Require(!l.empty(), "labels must be non-empty");
    Require(seen.insert(lower(l)).second, "duplicate label '" + l + "'");
  }
}

bool LabelSet::contains(const std::string& label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::string LabelSet::canonical(const std::string& name) const {
  const std::string key = lower(name);
  for (const auto& l : labels_) {
    if (lower(l) == key) return l;
  }
  return {};
}

std::string LabelRule::resolve(const std::string& name, const LabelSet& labels) const {
  if (auto it = explicit_map.find(name); it != explicit_map.end()) {
    return labels.contains(it->second) ? it->second : labels.canonical(it->second);
  }
  return labels.canonical(name);
}

bool is_duplicate_pair(const ImageRecord& a, const ImageRecord& b, int threshold) {
  return is_duplicate_hashes(a.hashes(), b.hashes(), threshold);
}

IngestResult scan_corpus(const std::vector<CorpusRoot>& roots, const LabelRule& rule,
                         const LabelSet& labels, int threads) {
  struct Job {
    fs::path file;
    const CorpusRoot* root;
  };
  std::vector<Job> jobs;
  for (const auto& root : roots) {
    std::error_code ec;
    if (!fs::is_directory(root.dir, ec)) {
      Throw(ErrorKind::kIo, "corpus root is not a directory: " + root.dir.string());
    }
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(root.dir, ec);
         !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
      if (it->is_regular_file() && has_image_extension(it->path())) files.push_back(it->path());
    }
    if (ec) Throw(ErrorKind::kIo, "cannot walk " + root.dir.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
    for (auto& f : files) jobs.push_back({std::move(f), &root});
  }

  std::vector<std::optional<ImageRecord>> slots(jobs.size());
  std::vector<std::string> slot_warnings(jobs.size());

  auto process = [&](std::size_t i) {
    const Job& job = jobs[i];
    const std::string dir_name = job.file.parent_path().filename().string();
    const std::string label = rule.resolve(dir_name, labels);
    if (label.empty()) {
      slot_warnings[i] = job.file.string() + ": directory '" + dir_name +
                         "' does not map to a label; skipped";
      return;
    }
    try {
      const RgbImage img = read_image(job.file);
      const ImageHashes h = hash_image(img.pixels, img.width, img.height);
      ImageRecord rec;
      rec.source = job.root->source;
      rec.id = job.root->source + "/" +
               fs::relative(job.file, job.root->dir).generic_string();
      rec.path = job.file.generic_string();
      rec.label = label;
      rec.width = img.width;
      rec.height = img.height;
      rec.ahash = h.ahash;
      rec.phash = h.phash;
      slots[i] = std::move(rec);
    } catch (const Error& e) {
      slot_warnings[i] = std::string(e.what()) + "; skipped";
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, jobs.size() ? jobs.size() : 1);
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) process(i);
      });
    }
  }

  IngestResult out;
  std::unordered_map<std::string, int> seen;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!slot_warnings[i].empty()) out.warnings.push_back(slot_warnings[i]);
    if (!slots[i]) continue;
    ImageRecord rec = std::move(*slots[i]);
    if (int n = seen[rec.id]++; n > 0) rec.id += "~" + std::to_string(n);
    out.records.push_back(std::move(rec));
  }
  std::sort(out.records.begin(), out.records.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
  return out;
}

std::vector<DuplicateGroup> group_duplicates(const std::vector<ImageRecord>& records,
                                             int threshold, bool prefilter) {
  Require(threshold >= 0, "duplicate threshold must be non-negative");
  const std::size_t n = records.size();
  UnionFind uf(n);

  if (prefilter && threshold < 16) {
    // Pigeonhole: with at most 15 differing aHash bits, at least one of the
    // sixteen 16-bit blocks matches exactly. A pair is tested only at the
    // first block where it matches.
    for (int block = 0; block < 16; ++block) {
      std::unordered_map<std::uint16_t, std::vector<std::size_t>> buckets;
      for (std::size_t i = 0; i < n; ++i) buckets[hash_block(records[i].ahash, block)].push_back(i);
      for (const auto& [key, members] : buckets) {
        for (std::size_t x = 0; x < members.size(); ++x) {
          for (std::size_t y = x + 1; y < members.size(); ++y) {
            const auto& a = records[members[x]];
            const auto& b = records[members[y]];
            bool earlier = false;
            for (int prev = 0; prev < block && !earlier; ++prev) {
              earlier = hash_block(a.ahash, prev) == hash_block(b.ahash, prev);
            }
            if (!earlier && is_duplicate_pair(a, b, threshold)) uf.unite(members[x], members[y]);
          }
        }
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (is_duplicate_pair(records[i], records[j], threshold)) uf.unite(i, j);
      }
    }
  }

  std::unordered_map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t i = 0; i < n; ++i) components[uf.find(i)].push_back(i);

  std::vector<DuplicateGroup> groups;
  for (auto& [root, idx] : components) {
    if (idx.size() < 2) continue;
    DuplicateGroup g;
    std::set<std::string> labels;
    const ImageRecord* best = nullptr;
    for (std::size_t i : idx) {
      const auto& r = records[i];
      g.members.push_back(r.id);
      labels.insert(r.label);
      if (!best || better_representative(r, *best)) best = &r;
    }
    std::sort(g.members.begin(), g.members.end());
    g.representative = best->id;
    g.label_conflict = labels.size() >= 2;
    groups.push_back(std::move(g));
  }
  std::sort(groups.begin(), groups.end(), [](const DuplicateGroup& a, const DuplicateGroup& b) {
    return a.members.front() < b.members.front();
  });
  return groups;
}

std::vector<DuplicateGroup> detect_label_conflicts(const std::vector<DuplicateGroup>& groups) {
  std::vector<DuplicateGroup> out;
  std::copy_if(groups.begin(), groups.end(), std::back_inserter(out),
               [](const DuplicateGroup& g) { return g.label_conflict; });
  return out;
}

CurationOutcome select_representatives(const std::vector<DuplicateGroup>& groups,
                                       const std::vector<ImageRecord>& records) {
  std::unordered_map<std::string, const ImageRecord*> by_id;
  for (const auto& r : records) {
    if (!by_id.emplace(r.id, &r).second) Throw(ErrorKind::kInvalidInput, "duplicate record id '" + r.id + "'");
  }

  std::set<std::string> dropped;
  long long conflicts = 0;
  for (const auto& g : groups) {
    if (g.label_conflict) ++conflicts;
    for (const auto& id : g.members) {
      if (!by_id.count(id)) Throw(ErrorKind::kInvalidInput, "group member '" + id + "' not in records");
      if (g.label_conflict || id != g.representative) dropped.insert(id);
    }
  }

  CurationOutcome out;
  std::map<std::string, std::pair<long long, long long>> per_source;  // total, removed
  for (const auto& r : records) {
    auto& [total, removed] = per_source[r.source];
    ++total;
    if (dropped.count(r.id)) {
      ++removed;
    } else {
      out.manifest.push_back(r);
    }
  }
  std::sort(out.manifest.begin(), out.manifest.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });

  CurationReport& rep = out.report;
  rep.total_raw = static_cast<long long>(records.size());
  rep.unique_remaining = static_cast<long long>(out.manifest.size());
  rep.duplicates_removed = rep.total_raw - rep.unique_remaining;
  rep.reduction_pct = rep.total_raw > 0 ? 100.0 * rep.duplicates_removed / rep.total_raw : 0.0;
  rep.conflict_groups = conflicts;
  for (const auto& [source, counts] : per_source) {
    rep.per_source_duplicate_pct[source] = 100.0 * counts.second / counts.first;
  }
  return out;
}

std::string CurationReport::to_text() const {
  std::ostringstream os;
  os << "total raw images:      " << total_raw << '\n'
     << "duplicates removed:    " << duplicates_removed << '\n'
     << "reduction:             " << fmt_pct(reduction_pct) << "%\n"
     << "cross-label conflicts: " << conflict_groups << " groups\n"
     << "unique remaining:      " << unique_remaining << '\n';
  if (!per_source_duplicate_pct.empty()) {
    os << "per-source duplicate share:\n";
    for (const auto& [source, pct] : per_source_duplicate_pct) {
      os << "  " << source << ": " << fmt_pct(pct) << "%\n";
    }
  }
  return os.str();
}

std::string CurationReport::to_json() const {
  nlohmann::ordered_json j;
  j["total_raw"] = total_raw;
  j["duplicates_removed"] = duplicates_removed;
  j["reduction_pct"] = reduction_pct;
  j["conflict_groups"] = conflict_groups;
  j["per_source_duplicate_pct"] = per_source_duplicate_pct;
  j["unique_remaining"] = unique_remaining;
  return j.dump(2) + "\n";
}

}  // namespace silofl
