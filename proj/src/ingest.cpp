// Copyright 2026 The Forge Authors. All Rights Reserved.
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

#include "forge/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "forge/error.hpp"
#include "forge/geometry.hpp"
#include "forge/text.hpp"

namespace forge {

std::string_view to_string(SourceFormat format) {
  switch (format) {
    case SourceFormat::CocoDetectionJson: return "CocoDetectionJson";
    case SourceFormat::RegionDescriptionJson: return "RegionDescriptionJson";
    case SourceFormat::ReferringJson: return "ReferringJson";
    case SourceFormat::CaptionJsonl: return "CaptionJsonl";
    case SourceFormat::PlainTextJsonl: return "PlainTextJsonl";
  }
  return "unknown";
}

std::optional<SourceFormat> source_format_from_string(std::string_view name) {
  if (name == "CocoDetectionJson" || name == "coco") return SourceFormat::CocoDetectionJson;
  if (name == "RegionDescriptionJson" || name == "regions") return SourceFormat::RegionDescriptionJson;
  if (name == "ReferringJson" || name == "referring") return SourceFormat::ReferringJson;
  if (name == "CaptionJsonl" || name == "caption") return SourceFormat::CaptionJsonl;
  if (name == "PlainTextJsonl" || name == "text") return SourceFormat::PlainTextJsonl;
  return std::nullopt;
}

Json IngestLedger::to_json() const {
  Json drop_list = Json::array();
  for (const auto& d : drops) drop_list.push_back({{"locator", d.locator}, {"reason", d.reason}});
  return {{"read", read},         {"emitted", emitted}, {"clamped", clamped}, {"dropped", dropped},
          {"negatives", negatives}, {"images", images},  {"drops", drop_list}};
}

namespace {

std::string id_string(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return v.dump();
  throw Error(ErrorCode::MalformedRecord, "id must be a string or integer");
}

std::string namespaced(Source source, const std::string& raw_id) {
  return std::string(to_string(source)) + ":" + raw_id;
}

// Shared bookkeeping for one ingest run.
class Run {
 public:
  Run(const SourceDescriptor& src, const IngestOptions& opts) : opts_(opts) { result_.source = src; }

  IngestResult& result() { return result_; }
  IngestLedger& ledger() { return result_.ledger; }
  Source source() const { return result_.source.name; }

  // Strict mode throws; lenient mode records the drop and returns.
  void reject(ErrorCode code, const std::string& reason, const std::string& locator) {
    if (!opts_.lenient) throw Error(code, reason, locator);
    ++ledger().dropped;
    ledger().drops.push_back({locator, std::string(to_string(code)) + ": " + reason});
  }

  // Validates (and under --lenient, clamps) a pixel box. Returns false if the
  // region was dropped.
  bool admit(Box& box, const AnnotatedImage& img, const std::string& locator) {
    auto err = check_box(box, img.width, img.height);
    if (!err) return true;
    if (*err == ErrorCode::OutOfBounds && opts_.lenient && box.x1 <= box.x2 && box.y1 <= box.y2) {
      const double overflow = std::max({-box.x1, -box.y1, box.x2 - img.width, box.y2 - img.height, 0.0});
      if (std::isfinite(overflow) && overflow <= opts_.clamp_tolerance_px) {
        clamp_box(box, img.width, img.height);
        ++ledger().clamped;
        return true;
      }
    }
    reject(*err, "box outside image " + img.image_id, locator);
    return false;
  }

  void emit_region(AnnotatedImage& img, RegionAnnotation region) {
    region.source = source();
    if (is_detailed_source(source())) region.detail_level = DetailLevel::Detailed;
    img.regions.push_back(std::move(region));
    ++ledger().emitted;
  }

 private:
  IngestOptions opts_;
  IngestResult result_;
};

Box xywh_box(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw Error(ErrorCode::MalformedRecord, "bbox must be [x, y, w, h]");
  for (const auto& v : j)
    if (!v.is_number()) throw Error(ErrorCode::MalformedRecord, "bbox must be [x, y, w, h]");
  const double x = j[0].get<double>(), y = j[1].get<double>();
  return Box{x, y, x + j[2].get<double>(), y + j[3].get<double>(), CoordSpace::pixels()};
}

AnnotatedImage image_record(Source source, const Json& j, const std::string& locator) {
  AnnotatedImage img;
  if (!j.is_object()) throw Error(ErrorCode::MalformedRecord, "image entry must be an object", locator);
  const Json* id = j.contains("id") ? &j.at("id") : (j.contains("image_id") ? &j.at("image_id") : nullptr);
  if (!id) throw Error(ErrorCode::MalformedRecord, "image entry has no id", locator);
  img.image_id = namespaced(source, id_string(*id));
  if (!j.contains("width") || !j.contains("height") || !j.at("width").is_number() || !j.at("height").is_number())
    throw Error(ErrorCode::MalformedRecord, "image entry needs numeric width and height", locator);
  img.width = j.at("width").get<int>();
  img.height = j.at("height").get<int>();
  if (img.width <= 0 || img.height <= 0) throw Error(ErrorCode::MalformedRecord, "image size must be positive", locator);
  for (const char* key : {"uri", "file_name", "url", "coco_url"}) {
    if (j.contains(key) && j.at(key).is_string()) {
      img.uri = j.at(key).get<std::string>();
      break;
    }
  }
  return img;
}

const Json& array_field(const Json& doc, const char* key, const std::string& path) {
  if (!doc.is_object() || !doc.contains(key) || !doc.at(key).is_array())
    throw Error(ErrorCode::MalformedRecord, std::string("expected array '") + key + "'", path);
  return doc.at(key);
}

// Images indexed by namespaced id, preserving file order.
struct ImageTable {
  std::vector<AnnotatedImage> images;
  std::unordered_map<std::string, std::size_t> index;

  AnnotatedImage* find(const std::string& id) {
    auto it = index.find(id);
    return it == index.end() ? nullptr : &images[it->second];
  }
};

ImageTable read_image_table(Run& run, const Json& doc, const std::string& path) {
  ImageTable table;
  const Json& images = array_field(doc, "images", path);
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto img = image_record(run.source(), images[i], path + ":images[" + std::to_string(i) + "]");
    if (!table.index.emplace(img.image_id, table.images.size()).second)
      throw Error(ErrorCode::MalformedRecord, "duplicate image id " + img.image_id, path);
    table.images.push_back(std::move(img));
  }
  return table;
}

std::vector<std::string> sentences_of(const Json& ref) {
  std::vector<std::string> out;
  auto take = [&out](const Json& s) {
    if (s.is_string()) {
      out.push_back(s.get<std::string>());
    } else if (s.is_object() && s.contains("sent") && s.at("sent").is_string()) {
      out.push_back(s.at("sent").get<std::string>());
    } else {
      throw Error(ErrorCode::MalformedRecord, "sentence must be a string or {\"sent\": str}");
    }
  };
  if (ref.contains("sentences")) {
    const Json& s = ref.at("sentences");
    if (!s.is_array()) throw Error(ErrorCode::MalformedRecord, "sentences must be an array");
    for (const auto& e : s) take(e);
  } else if (ref.contains("expression")) {
    take(ref.at("expression"));
  } else {
    throw Error(ErrorCode::MalformedRecord, "referring record has no expression");
  }
  return out;
}

}  // namespace

IngestResult ingest_coco_detection(const SourceDescriptor& src, const IngestOptions& opts) {
  Run run(src, opts);
  const std::string path = src.path.string();
  const Json doc = read_json_file(src.path);
  ImageTable table = read_image_table(run, doc, path);

  std::unordered_map<std::string, std::string> categories;
  const Json& cats = array_field(doc, "categories", path);
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const auto& c = cats[i];
    if (!c.is_object() || !c.contains("id") || !c.contains("name") || !c.at("name").is_string())
      throw Error(ErrorCode::MalformedRecord, "category needs id and name", path + ":categories[" + std::to_string(i) + "]");
    categories[id_string(c.at("id"))] = normalize_label(c.at("name").get<std::string>());
  }

  const Json& anns = array_field(doc, "annotations", path);
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string loc = path + ":annotations[" + std::to_string(i) + "]";
    const Json& a = anns[i];
    ++run.ledger().read;
    if (!a.is_object() || !a.contains("image_id") || !a.contains("category_id") || !a.contains("bbox")) {
      run.reject(ErrorCode::MalformedRecord, "annotation needs image_id, category_id and bbox", loc);
      continue;
    }
    AnnotatedImage* img = table.find(namespaced(src.name, id_string(a.at("image_id"))));
    if (!img) {
      run.reject(ErrorCode::DanglingImageId, "unknown image id " + id_string(a.at("image_id")), loc);
      continue;
    }
    auto cat = categories.find(id_string(a.at("category_id")));
    if (cat == categories.end()) {
      run.reject(ErrorCode::DanglingCategoryId, "unknown category id " + id_string(a.at("category_id")), loc);
      continue;
    }
    Box box;
    try {
      box = xywh_box(a.at("bbox"));
    } catch (const Error& e) {
      run.reject(e.code(), e.what(), loc);
      continue;
    }
    if (!run.admit(box, *img, loc)) continue;
    RegionAnnotation region;
    region.box = box;
    region.expression = cat->second;
    region.category = cat->second;
    run.emit_region(*img, std::move(region));
  }

  run.result().images = std::move(table.images);
  run.ledger().images = run.result().images.size();
  return std::move(run.result());
}

IngestResult ingest_referring(const SourceDescriptor& src, const IngestOptions& opts) {
  Run run(src, opts);
  const std::string path = src.path.string();
  const Json doc = read_json_file(src.path);
  ImageTable table = read_image_table(run, doc, path);

  const Json& refs = array_field(doc, "refs", path);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const std::string loc = path + ":refs[" + std::to_string(i) + "]";
    const Json& r = refs[i];
    if (!r.is_object() || !r.contains("image_id")) {
      ++run.ledger().read;
      run.reject(ErrorCode::MalformedRecord, "referring record needs image_id", loc);
      continue;
    }
    std::vector<std::string> sentences;
    std::vector<Box> boxes;
    try {
      sentences = sentences_of(r);
      if (r.contains("bboxes")) {
        if (!r.at("bboxes").is_array()) throw Error(ErrorCode::MalformedRecord, "bboxes must be an array");
        for (const auto& b : r.at("bboxes")) boxes.push_back(xywh_box(b));
      } else if (r.contains("bbox")) {
        boxes.push_back(xywh_box(r.at("bbox")));
      } else {
        throw Error(ErrorCode::MalformedRecord, "referring record has no bbox or bboxes");
      }
    } catch (const Error& e) {
      ++run.ledger().read;
      run.reject(e.code(), e.what(), loc);
      continue;
    }

    AnnotatedImage* img = table.find(namespaced(src.name, id_string(r.at("image_id"))));
    if (!img) {
      const std::size_t n = std::max<std::size_t>(1, sentences.size() * boxes.size());
      run.ledger().read += n;
      for (std::size_t k = 0; k < n; ++k)
        run.reject(ErrorCode::DanglingImageId, "unknown image id " + id_string(r.at("image_id")), loc);
      continue;
    }

    for (std::size_t s = 0; s < sentences.size(); ++s) {
      const std::string expr = normalize_whitespace(sentences[s]);
      const std::string sloc = loc + ".sentences[" + std::to_string(s) + "]";
      if (boxes.empty()) {
        if (expr.empty()) {
          ++run.ledger().read;
          run.reject(ErrorCode::EmptyExpression, "empty referring expression", sloc);
          continue;
        }
        img->negative_expressions.push_back(expr);
        ++run.ledger().negatives;
        continue;
      }
      for (const auto& b : boxes) {
        ++run.ledger().read;
        if (expr.empty()) {
          run.reject(ErrorCode::EmptyExpression, "empty referring expression", sloc);
          continue;
        }
        Box box = b;
        if (!run.admit(box, *img, sloc)) continue;
        RegionAnnotation region;
        region.box = box;
        region.expression = expr;
        run.emit_region(*img, std::move(region));
      }
    }
  }

  run.result().images = std::move(table.images);
  run.ledger().images = run.result().images.size();
  return std::move(run.result());
}

IngestResult ingest_region_descriptions(const SourceDescriptor& src, const IngestOptions& opts) {
  Run run(src, opts);
  const std::string path = src.path.string();
  const Json doc = read_json_file(src.path);
  const Json* records = &doc;
  if (doc.is_object() && doc.contains("images")) records = &doc.at("images");
  if (!records->is_array()) throw Error(ErrorCode::MalformedRecord, "expected an array of image records", path);

  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < records->size(); ++i) {
    const std::string loc = path + "[" + std::to_string(i) + "]";
    const Json& rec = (*records)[i];
    AnnotatedImage img = image_record(src.name, rec, loc);
    if (!seen.emplace(img.image_id, i).second)
      throw Error(ErrorCode::MalformedRecord, "duplicate image id " + img.image_id, loc);
    const Json regions = rec.value("regions", Json::array());
    if (!regions.is_array()) throw Error(ErrorCode::MalformedRecord, "regions must be an array", loc);
    for (std::size_t k = 0; k < regions.size(); ++k) {
      const std::string rloc = loc + ".regions[" + std::to_string(k) + "]";
      const Json& r = regions[k];
      ++run.ledger().read;
      if (!r.is_object() || !r.contains("phrase") || !r.at("phrase").is_string()) {
        run.reject(ErrorCode::MalformedRecord, "region needs a phrase", rloc);
        continue;
      }
      Box box;
      if (r.contains("bbox")) {
        try {
          box = xywh_box(r.at("bbox"));
        } catch (const Error& e) {
          run.reject(e.code(), e.what(), rloc);
          continue;
        }
      } else if (r.contains("x") && r.contains("y") && r.contains("width") && r.contains("height") &&
                 r.at("x").is_number() && r.at("y").is_number() && r.at("width").is_number() &&
                 r.at("height").is_number()) {
        const double x = r.at("x").get<double>(), y = r.at("y").get<double>();
        box = Box{x, y, x + r.at("width").get<double>(), y + r.at("height").get<double>(), CoordSpace::pixels()};
      } else {
        run.reject(ErrorCode::MalformedRecord, "region needs x, y, width, height", rloc);
        continue;
      }
      const std::string expr = normalize_whitespace(r.at("phrase").get<std::string>());
      if (expr.empty()) {
        run.reject(ErrorCode::EmptyExpression, "empty region phrase", rloc);
        continue;
      }
      if (!run.admit(box, img, rloc)) continue;
      RegionAnnotation region;
      region.box = box;
      region.expression = expr;
      run.emit_region(img, std::move(region));
    }
    run.result().images.push_back(std::move(img));
  }
  run.ledger().images = run.result().images.size();
  return std::move(run.result());
}

IngestResult ingest_captions(const SourceDescriptor& src, const IngestOptions& opts) {
  Run run(src, opts);
  const std::string path = src.path.string();
  std::unordered_map<std::string, std::size_t> seen;
  for_each_jsonl(src.path, [&](const Json& j, std::size_t line) {
    const std::string loc = path + ":" + std::to_string(line);
    ++run.ledger().read;
    AnnotatedImage img;
    try {
      img = image_record(src.name, j, loc);
    } catch (const Error& e) {
      run.reject(e.code(), e.what(), loc);
      return;
    }
    if (!j.contains("caption") || !j.at("caption").is_string() ||
        normalize_whitespace(j.at("caption").get<std::string>()).empty()) {
      run.reject(ErrorCode::MalformedRecord, "caption record needs a non-empty caption", loc);
      return;
    }
    TaskSample s;
    s.kind = TaskKind::Caption;
    s.source = src.name;
    s.image_ref = img.image_id;
    s.payload = CaptionPayload{normalize_whitespace(j.at("caption").get<std::string>())};
    auto [it, fresh] = seen.emplace(img.image_id, 0);
    s.sample_id = "cap:" + img.image_id + (it->second ? "#" + std::to_string(it->second) : "");
    ++it->second;
    if (fresh) run.result().images.push_back(std::move(img));
    run.result().samples.push_back(std::move(s));
    ++run.ledger().emitted;
  });
  run.ledger().images = run.result().images.size();
  return std::move(run.result());
}

IngestResult ingest_text_only(const SourceDescriptor& src, const IngestOptions& opts) {
  Run run(src, opts);
  const std::string path = src.path.string();
  for_each_jsonl(src.path, [&](const Json& j, std::size_t line) {
    const std::string loc = path + ":" + std::to_string(line);
    ++run.ledger().read;
    if (!j.is_object()) {
      run.reject(ErrorCode::MalformedRecord, "record must be an object", loc);
      return;
    }
    for (const char* key : {"image", "image_id", "images"}) {
      if (j.contains(key) && !j.at(key).is_null()) {
        run.reject(ErrorCode::HasImageInTextSource, std::string("text-only record carries '") + key + "'", loc);
        return;
      }
    }
    TaskSample s;
    s.kind = TaskKind::LanguageOnly;
    s.source = src.name;
    try {
      Json wrapper = {{"sample_id", "x"}, {"kind", "LanguageOnly"}, {"image_id", nullptr},
                      {"source", to_string(src.name)}, {"payload", {{"turns", j.value("turns", Json())}}}};
      s.payload = sample_from_json(wrapper).payload;
    } catch (const Error& e) {
      run.reject(ErrorCode::MalformedRecord, e.what(), loc);
      return;
    }
    const auto& turns = std::get<DialoguePayload>(s.payload).turns;
    if (turns.empty()) {
      run.reject(ErrorCode::MalformedRecord, "dialogue has no turns", loc);
      return;
    }
    const std::string raw_id = j.contains("id") ? id_string(j.at("id")) : std::to_string(line);
    s.sample_id = "txt:" + std::string(to_string(src.name)) + ":" + raw_id;
    run.result().samples.push_back(std::move(s));
    ++run.ledger().emitted;
  });
  return std::move(run.result());
}

IngestResult ingest(const SourceDescriptor& src, const IngestOptions& opts) {
  switch (src.format) {
    case SourceFormat::CocoDetectionJson: return ingest_coco_detection(src, opts);
    case SourceFormat::ReferringJson: return ingest_referring(src, opts);
    case SourceFormat::RegionDescriptionJson: return ingest_region_descriptions(src, opts);
    case SourceFormat::CaptionJsonl: return ingest_captions(src, opts);
    case SourceFormat::PlainTextJsonl: return ingest_text_only(src, opts);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown source format");
}

void write_ingest_output(const IngestResult& result, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  AtomicWriter images(out_dir / "images.jsonl");
  AtomicWriter regions(out_dir / "regions.jsonl");
  for (const auto& img : result.images) {
    images.write_json_line(image_to_json(img));
    for (const auto& r : img.regions) regions.write_json_line(region_to_json(img.image_id, r));
  }
  std::optional<AtomicWriter> samples;
  if (!result.samples.empty()) {
    samples.emplace(out_dir / "samples.jsonl");
    for (const auto& s : result.samples) samples->write_json_line(sample_to_json(s));
  }
  Json ledger = result.ledger.to_json();
  ledger["source"] = to_string(result.source.name);
  ledger["format"] = to_string(result.source.format);
  images.commit();
  regions.commit();
  if (samples) samples->commit();
  write_json_file(out_dir / "ledger.json", ledger);
}

Corpus load_corpus(const fs::path& dir) {
  Corpus corpus;
  std::unordered_map<std::string, std::size_t> index;
  if (fs::exists(dir / "images.jsonl")) {
    for_each_jsonl(dir / "images.jsonl", [&](const Json& j, std::size_t) {
      auto img = image_from_json(j);
      if (!index.emplace(img.image_id, corpus.images.size()).second)
        throw Error(ErrorCode::MalformedRecord, "duplicate image id " + img.image_id);
      corpus.images.push_back(std::move(img));
    });
  }
  if (fs::exists(dir / "regions.jsonl")) {
    for_each_jsonl(dir / "regions.jsonl", [&](const Json& j, std::size_t) {
      auto [image_id, region] = region_from_json(j);
      auto it = index.find(image_id);
      if (it == index.end()) throw Error(ErrorCode::DanglingImageId, "region references unknown image " + image_id);
      corpus.images[it->second].regions.push_back(std::move(region));
    });
  }
  if (fs::exists(dir / "samples.jsonl")) {
    for_each_jsonl(dir / "samples.jsonl",
                   [&](const Json& j, std::size_t) { corpus.samples.push_back(sample_from_json(j)); });
  }
  return corpus;
}

}  // namespace forge
