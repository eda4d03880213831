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

#include <algorithm>
#include <fstream>

#include "curation.hpp"
#include "error.hpp"
#include "util.hpp"

namespace silofl {

namespace {
constexpr const char* kManifestHeader = "id,source,path,label,width,height,ahash,phash";
}

void write_manifest(const std::vector<ImageRecord>& records, const std::filesystem::path& path) {
  std::vector<const ImageRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const ImageRecord* a, const ImageRecord* b) { return a->id < b->id; });

  std::ofstream out(path, std::ios::binary);
  if (!out) Throw(ErrorKind::kIo, "cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const ImageRecord* r : sorted) {
    out << csv_escape(r->id) << ',' << csv_escape(r->source) << ',' << csv_escape(r->path) << ','
        << csv_escape(r->label) << ',' << r->width << ',' << r->height << ','
        << r->ahash.to_hex() << ',' << r->phash.to_hex() << '\n';
  }
  if (!out) Throw(ErrorKind::kIo, "write failed for manifest " + path.string());
}

std::vector<ImageRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Throw(ErrorKind::kIo, "cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) Throw(ErrorKind::kParse, path.string() + ":1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    Throw(ErrorKind::kParse, path.string() + ":1: unexpected header '" + line + "'");
  }

  std::vector<ImageRecord> records;
  std::vector<std::string> f;
  for (long long lineno = 2; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    const std::string loc = path.string() + ":" + std::to_string(lineno) + ": ";
    if (!split_csv_line(line, f)) Throw(ErrorKind::kParse, loc + "unterminated quote");
    if (f.size() != 8) {
      Throw(ErrorKind::kParse, loc + "expected 8 fields, got " + std::to_string(f.size()));
    }
    ImageRecord r;
    r.id = f[0];
    r.source = f[1];
    r.path = f[2];
    r.label = f[3];
    if (!parse_number(f[4], r.width) || !parse_number(f[5], r.height) || r.width < 1 ||
        r.height < 1) {
      Throw(ErrorKind::kParse, loc + "invalid width/height");
    }
    try {
      r.ahash = Hash256::from_hex(f[6]);
      r.phash = Hash256::from_hex(f[7]);
    } catch (const Error& e) {
      Throw(ErrorKind::kParse, loc + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace silofl
