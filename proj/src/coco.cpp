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
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "curation.hpp"
#include "error.hpp"
#include "imageio.hpp"

namespace silofl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CocoBox {
  long long ann_id;
  long long category_id;
  double x, y, w, h;
};

struct CocoImage {
  long long id;
  std::string file_name;
  std::vector<CocoBox> boxes;
};

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    Throw(ErrorKind::kParse, where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

long long int_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_integer()) Throw(ErrorKind::kParse, where + "." + key + ": expected integer");
  return v.get<long long>();
}

const json& array_field(const json& root, const char* key) {
  const json& v = field(root, key, "$");
  if (!v.is_array()) Throw(ErrorKind::kParse, std::string("$.") + key + ": expected array");
  return v;
}

}  // namespace

IngestResult coco_to_classification(const fs::path& manifest, const fs::path& images_root,
                                    const std::string& source, const LabelRule& rule,
                                    const LabelSet& labels) {
  std::ifstream in(manifest);
  if (!in) Throw(ErrorKind::kIo, "cannot open COCO manifest " + manifest.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    Throw(ErrorKind::kParse, manifest.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
  const std::string where = manifest.string();

  std::map<long long, std::string> categories;
  const json& cats = array_field(root, "categories");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const std::string loc = where + ": $.categories[" + std::to_string(i) + "]";
    const json& name = field(cats[i], "name", loc);
    if (!name.is_string()) Throw(ErrorKind::kParse, loc + ".name: expected string");
    categories[int_field(cats[i], "id", loc)] = name.get<std::string>();
  }

  std::map<long long, CocoImage> images;
  const json& imgs = array_field(root, "images");
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const std::string loc = where + ": $.images[" + std::to_string(i) + "]";
    const long long id = int_field(imgs[i], "id", loc);
    const json& name = field(imgs[i], "file_name", loc);
    if (!name.is_string()) Throw(ErrorKind::kParse, loc + ".file_name: expected string");
    images[id] = CocoImage{id, name.get<std::string>(), {}};
  }

  const json& anns = array_field(root, "annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string loc = where + ": $.annotations[" + std::to_string(i) + "]";
    const long long image_id = int_field(anns[i], "image_id", loc);
    const long long cat = int_field(anns[i], "category_id", loc);
    const json& bbox = field(anns[i], "bbox", loc);
    if (!bbox.is_array() || bbox.size() != 4 ||
        !std::all_of(bbox.begin(), bbox.end(), [](const json& v) { return v.is_number(); })) {
      Throw(ErrorKind::kParse, loc + ".bbox: expected [x, y, width, height]");
    }
    auto it = images.find(image_id);
    if (it == images.end()) Throw(ErrorKind::kParse, loc + ": unknown image_id " + std::to_string(image_id));
    if (!categories.count(cat)) Throw(ErrorKind::kParse, loc + ": unknown category_id " + std::to_string(cat));
    const long long ann_id = anns[i].contains("id") ? int_field(anns[i], "id", loc)
                                                    : static_cast<long long>(i);
    it->second.boxes.push_back({ann_id, cat, bbox[0].get<double>(), bbox[1].get<double>(),
                                bbox[2].get<double>(), bbox[3].get<double>()});
  }

  IngestResult out;
  for (auto& [id, image] : images) {
    if (image.boxes.empty()) continue;
    std::set<long long> cats_present;
    for (const auto& b : image.boxes) cats_present.insert(b.category_id);
    if (cats_present.size() >= 2) continue;  // mixed-class images are discarded whole

    const std::string& cat_name = categories[*cats_present.begin()];
    const std::string label = rule.resolve(cat_name, labels);
    if (label.empty()) {
      out.warnings.push_back(image.file_name + ": category '" + cat_name +
                             "' does not map to a label; skipped");
      continue;
    }

    const fs::path file = images_root / image.file_name;
    RgbImage pixels;
    try {
      pixels = read_image(file);
    } catch (const Error& e) {
      out.warnings.push_back(std::string(e.what()) + "; skipped");
      continue;
    }

    std::sort(image.boxes.begin(), image.boxes.end(),
              [](const CocoBox& a, const CocoBox& b) { return a.ann_id < b.ann_id; });
    for (const auto& b : image.boxes) {
      const double x0 = std::clamp(b.x, 0.0, static_cast<double>(pixels.width));
      const double y0 = std::clamp(b.y, 0.0, static_cast<double>(pixels.height));
      const double x1 = std::clamp(b.x + b.w, 0.0, static_cast<double>(pixels.width));
      const double y1 = std::clamp(b.y + b.h, 0.0, static_cast<double>(pixels.height));
      if ((x1 - x0) * (y1 - y0) < 1.0 || x1 <= x0 || y1 <= y0) continue;
      const int cx0 = static_cast<int>(std::floor(x0));
      const int cy0 = static_cast<int>(std::floor(y0));
      const int cx1 = std::max(cx0 + 1, static_cast<int>(std::ceil(x1)));
      const int cy1 = std::max(cy0 + 1, static_cast<int>(std::ceil(y1)));
      const RgbImage crop = pixels.crop(cx0, cy0, cx1 - cx0, cy1 - cy0);
      const ImageHashes h = hash_image(crop.pixels, crop.width, crop.height);

      ImageRecord rec;
      rec.source = source;
      rec.id = source + "/" + image.file_name + "#ann" + std::to_string(b.ann_id);
      rec.path = file.generic_string() + "#ann" + std::to_string(b.ann_id);
      rec.label = label;
      rec.width = crop.width;
      rec.height = crop.height;
      rec.ahash = h.ahash;
      rec.phash = h.phash;
      out.records.push_back(std::move(rec));
    }
  }
  std::sort(out.records.begin(), out.records.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.id < b.id; });
  return out;
}

}  // namespace silofl
