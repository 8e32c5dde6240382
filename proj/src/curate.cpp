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

#include "forge/curate.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "forge/error.hpp"
#include "forge/geometry.hpp"
#include "forge/parallel.hpp"
#include "forge/text.hpp"

namespace forge {

// ---- lexicon ----------------------------------------------------------------

const Lexicon& Lexicon::builtin() {
  static const Lexicon lexicon{
      {"a", "an", "the"},
      {"left", "right", "top", "bottom", "front", "back", "middle", "center", "near", "far", "first", "second",
       "third", "upper", "lower"},
      {"is",      "are",      "was",     "were",    "has",     "have",     "had",      "wearing",
       "holding", "standing", "sitting", "riding",  "walking", "looking",  "carrying", "playing",
       "eating",  "lying",    "laying",  "running", "hanging", "using",    "talking",  "reading",
       "drinking", "covering", "containing", "showing", "facing", "leaning", "parked",  "flying",
       "swimming", "jumping", "waiting", "working", "smiling", "watching", "pulling",  "pushing",
       "throwing", "catching", "cutting", "driving"},
  };
  return lexicon;
}

Lexicon Lexicon::load(const fs::path& path) {
  const Json j = read_json_file(path);
  auto words = [&](const char* key) {
    std::set<std::string> out;
    if (!j.contains(key) || !j.at(key).is_array())
      throw Error(ErrorCode::Config, std::string("lexicon needs an array '") + key + "'", path.string());
    for (const auto& w : j.at(key)) {
      if (!w.is_string()) throw Error(ErrorCode::Config, "lexicon entries must be strings", path.string());
      out.insert(to_lower(w.get<std::string>()));
    }
    return out;
  };
  return Lexicon{words("articles"), words("positional"), words("verbs")};
}

Json Lexicon::to_json() const {
  return {{"articles", articles}, {"positional", positional}, {"verbs", verbs}};
}

// ---- classifier ---------------------------------------------------------------

namespace {

std::vector<std::string> strip_leading_articles(std::vector<std::string> tokens, const Lexicon& lexicon) {
  std::size_t skip = 0;
  while (skip < tokens.size() && lexicon.articles.count(tokens[skip])) ++skip;
  tokens.erase(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(skip));
  return tokens;
}

}  // namespace

ExpressionClass classify_expression(std::string_view expression, const Lexicon& lexicon) {
  const auto all_tokens = tokenize(expression);
  if (all_tokens.empty()) throw Error(ErrorCode::EmptyExpression, "expression has no tokens");
  const auto tokens = strip_leading_articles(all_tokens, lexicon);
  const std::size_t n = tokens.size();

  if (n <= kClassLevelMaxTokens) {
    const bool modifiers_positional = n == 0 || std::all_of(tokens.begin(), tokens.end() - 1, [&](const auto& t) {
                                        return lexicon.positional.count(t) > 0;
                                      });
    if (modifiers_positional) return {DetailLevel::ClassLevel, {"class.short_positional"}};
  }

  ExpressionClass out{DetailLevel::Detailed, {}};
  if (n >= kDetailedMinTokens) out.evidence.push_back("detailed.length");
  for (std::size_t i = 0; i < n; ++i) {
    if (lexicon.verbs.count(tokens[i]) && n - i - 1 >= kVerbTailTokens) {
      out.evidence.push_back("detailed.verb:" + tokens[i]);
      break;
    }
  }
  if (!out.evidence.empty()) return out;
  return {DetailLevel::Concise, {"concise.default"}};
}

std::string head_noun(std::string_view expression, const Lexicon& lexicon) {
  const auto all_tokens = tokenize(expression);
  if (all_tokens.empty()) return normalize_label(expression);
  auto tokens = strip_leading_articles(all_tokens, lexicon);
  std::vector<std::string> content;
  for (auto& t : tokens)
    if (!lexicon.positional.count(t)) content.push_back(std::move(t));
  return content.empty() ? all_tokens.back() : content.back();
}

std::string region_label(const RegionAnnotation& region, const Lexicon& lexicon) {
  if (region.category) {
    auto label = normalize_label(*region.category);
    if (!label.empty()) return label;
  }
  return head_noun(region.expression, lexicon);
}

// ---- ledger -------------------------------------------------------------------

CurationLedger& CurationLedger::operator+=(const CurationLedger& o) {
  input_regions += o.input_regions;
  merged_samples += o.merged_samples;
  emitted_boxes += o.emitted_boxes;
  deduped_boxes += o.deduped_boxes;
  dropped_class_level += o.dropped_class_level;
  retained_concise += o.retained_concise;
  retained_detailed += o.retained_detailed;
  return *this;
}

Json CurationLedger::to_json() const {
  return {{"input_regions", input_regions},
          {"merged_samples", merged_samples},
          {"emitted_boxes", emitted_boxes},
          {"deduped_boxes", deduped_boxes},
          {"dropped_class_level", dropped_class_level},
          {"retained_concise", retained_concise},
          {"retained_detailed", retained_detailed}};
}

bool CurationReport::balanced() const {
  for (const auto* level : {&task_level, &annotation_level})
    for (const auto& [source, ledger] : *level)
      if (!ledger.balanced()) return false;
  return true;
}

Json CurationReport::to_json() const {
  auto level_json = [](const std::map<Source, CurationLedger>& level) {
    Json j = Json::object();
    for (const auto& [source, ledger] : level) j[std::string(to_string(source))] = ledger.to_json();
    return j;
  };
  return {{"task_level", level_json(task_level)},
          {"annotation_level", level_json(annotation_level)},
          {"rec_samples", rec_samples},
          {"grounding_samples", grounding_samples},
          {"balanced", balanced()}};
}

// ---- task-level merge ---------------------------------------------------------

namespace {

bool box_order(const Box& a, const Box& b) {
  if (a.x1 != b.x1) return a.x1 < b.x1;
  if (a.y1 != b.y1) return a.y1 < b.y1;
  if (a.x2 != b.x2) return a.x2 < b.x2;
  return a.y2 < b.y2;
}

// Keeps the first of every group of boxes with IoU >= threshold against an
// already kept box; returns the number removed.
std::size_t dedup_keep_first(std::vector<Box>& boxes, double threshold) {
  std::vector<Box> kept;
  kept.reserve(boxes.size());
  for (const auto& b : boxes) {
    const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Box& k) { return iou(k, b) >= threshold; });
    if (!dup) kept.push_back(b);
  }
  const std::size_t removed = boxes.size() - kept.size();
  boxes = std::move(kept);
  return removed;
}

ObjectsPayload group_regions(const AnnotatedImage& image, const Lexicon& lexicon) {
  ObjectsPayload payload{image.width, image.height, {}};
  std::map<std::string, std::size_t> slot;
  for (const auto& r : image.regions) {
    const auto label = region_label(r, lexicon);
    auto [it, fresh] = slot.emplace(label, payload.objects.size());
    if (fresh) payload.objects.push_back({label, {}});
    payload.objects[it->second].boxes.push_back(r.box);
  }
  return payload;
}

}  // namespace

std::size_t merge_objects(ObjectsPayload& payload, double dedup_iou) {
  std::size_t removed = 0;
  for (auto& o : payload.objects) {
    removed += dedup_keep_first(o.boxes, dedup_iou);
    std::stable_sort(o.boxes.begin(), o.boxes.end(), box_order);
  }
  std::stable_sort(payload.objects.begin(), payload.objects.end(),
                   [](const LabeledBoxes& a, const LabeledBoxes& b) { return a.label < b.label; });
  return removed;
}

TaskSample merge_to_detection(const AnnotatedImage& image, double dedup_iou, CurationLedger* ledger,
                              const Lexicon& lexicon) {
  if (image.regions.empty()) throw Error(ErrorCode::NoRegions, "image has no regions", image.image_id);
  ObjectsPayload payload = group_regions(image, lexicon);
  const std::size_t removed = merge_objects(payload, dedup_iou);

  if (ledger) {
    ledger->input_regions += image.regions.size();
    ledger->deduped_boxes += removed;
    ledger->emitted_boxes += image.regions.size() - removed;
    ledger->merged_samples += 1;
  }
  TaskSample s;
  s.sample_id = "det:" + image.image_id;
  s.kind = TaskKind::Detection;
  s.image_ref = image.image_id;
  s.source = image.regions.front().source;
  s.payload = std::move(payload);
  return s;
}

// ---- annotation-level (REG) ----------------------------------------------------

namespace {

// REG samples for one image; ledger deltas accumulate into `ledgers`.
std::vector<TaskSample> reg_for_image(const AnnotatedImage& image, std::map<Source, CurationLedger>& ledgers,
                                      const Lexicon& lexicon) {
  std::vector<TaskSample> out;
  for (std::size_t i = 0; i < image.regions.size(); ++i) {
    const auto& r = image.regions[i];
    if (r.category) continue;
    auto& ledger = ledgers[r.source];
    ++ledger.input_regions;
    DetailLevel level = r.detail_level;
    if (level == DetailLevel::Unclassified) level = classify_expression(r.expression, lexicon).level;
    if (level == DetailLevel::ClassLevel) {
      ++ledger.dropped_class_level;
      continue;
    }
    (level == DetailLevel::Detailed ? ledger.retained_detailed : ledger.retained_concise)++;
    TaskSample s;
    s.sample_id = "reg:" + image.image_id + ":" + std::to_string(i);
    s.kind = TaskKind::REG;
    s.image_ref = image.image_id;
    s.source = r.source;
    s.payload = RegPayload{image.width, image.height, r.box, r.expression, level};
    out.push_back(std::move(s));
  }
  return out;
}

bool is_referring_source(Source s) {
  return s == Source::RefCOCO || s == Source::RefCOCOPlus || s == Source::RefCOCOg || s == Source::GRefCOCO;
}

std::vector<TaskSample> rec_for_image(const AnnotatedImage& image) {
  std::vector<TaskSample> out;
  for (std::size_t i = 0; i < image.regions.size(); ++i) {
    const auto& r = image.regions[i];
    if (!is_referring_source(r.source)) continue;
    TaskSample s;
    s.sample_id = "rec:" + image.image_id + ":" + std::to_string(i);
    s.kind = TaskKind::REC;
    s.image_ref = image.image_id;
    s.source = r.source;
    s.payload = RecPayload{image.width, image.height, r.expression, r.box};
    out.push_back(std::move(s));
  }
  return out;
}

Source image_source(const AnnotatedImage& image) {
  if (!image.regions.empty()) return image.regions.front().source;
  const auto colon = image.image_id.find(':');
  if (colon != std::string::npos)
    if (auto s = source_from_string(std::string_view(image.image_id).substr(0, colon))) return *s;
  return Source::MSCOCO;
}

ObjectsPayload detection_labels(const AnnotatedImage& image, double dedup_iou, const Lexicon& lexicon) {
  ObjectsPayload payload = group_regions(image, lexicon);
  merge_objects(payload, dedup_iou);
  return payload;
}

std::map<Source, std::vector<std::string>> label_pools(const std::vector<Source>& sources,
                                                       const std::vector<ObjectsPayload>& payloads) {
  std::map<Source, std::set<std::string>> sets;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    auto& pool = sets[sources[i]];
    for (const auto& o : payloads[i].objects) pool.insert(o.label);
  }
  std::map<Source, std::vector<std::string>> pools;
  for (auto& [source, labels] : sets) pools[source].assign(labels.begin(), labels.end());
  return pools;
}

TaskSample grounding_for_image(const AnnotatedImage& image, const ObjectsPayload& detection,
                               const std::vector<std::string>& pool, std::uint64_t seed) {
  Rng rng(derive_seed(seed, image.image_id));
  std::size_t absent = 0;
  for (const auto& label : pool)
    if (std::none_of(detection.objects.begin(), detection.objects.end(),
                     [&](const LabeledBoxes& o) { return o.label == label; }))
      ++absent;
  const std::size_t upper = std::min(kMaxGroundingQueries, detection.objects.size() + absent);
  const auto k = static_cast<std::size_t>(uniform_below(rng, upper + 1));
  return build_grounding_sample(image.image_id, image_source(image), detection, pool, k, rng);
}

}  // namespace

std::vector<TaskSample> curate_reg(const std::vector<AnnotatedImage>& images,
                                   std::map<Source, CurationLedger>& ledgers, const Lexicon& lexicon) {
  std::vector<TaskSample> out;
  for (const auto& image : images) {
    auto samples = reg_for_image(image, ledgers, lexicon);
    std::move(samples.begin(), samples.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<TaskSample> extract_rec(const std::vector<AnnotatedImage>& images) {
  std::vector<TaskSample> out;
  for (const auto& image : images) {
    auto samples = rec_for_image(image);
    std::move(samples.begin(), samples.end(), std::back_inserter(out));
  }
  return out;
}

// ---- grounding -------------------------------------------------------------------

QueryMix grounding_query_mix(std::size_t k, std::size_t present, std::size_t absent) {
  QueryMix mix;
  mix.negatives = std::min(absent, k / 2);
  mix.positives = std::min(present, k - mix.negatives);
  mix.negatives = std::min(absent, k - mix.positives);
  return mix;
}

TaskSample build_grounding_sample(const std::string& image_id, Source source, const ObjectsPayload& detection,
                                  const std::vector<std::string>& pool, std::size_t k, Rng& rng) {
  std::vector<std::size_t> present(detection.objects.size());
  std::iota(present.begin(), present.end(), 0);
  std::vector<std::string> absent;
  for (const auto& label : pool)
    if (std::none_of(detection.objects.begin(), detection.objects.end(),
                     [&](const LabeledBoxes& o) { return o.label == label; }))
      absent.push_back(label);

  const QueryMix mix = grounding_query_mix(std::min(k, kMaxGroundingQueries), present.size(), absent.size());
  seeded_shuffle(present, rng);
  seeded_shuffle(absent, rng);

  ObjectsPayload payload{detection.width, detection.height, {}};
  for (std::size_t i = 0; i < mix.positives; ++i) payload.objects.push_back(detection.objects[present[i]]);
  for (std::size_t i = 0; i < mix.negatives; ++i) payload.objects.push_back({absent[i], {}});
  std::sort(payload.objects.begin(), payload.objects.end(),
            [](const LabeledBoxes& a, const LabeledBoxes& b) { return a.label < b.label; });

  TaskSample s;
  s.sample_id = "grd:" + image_id;
  s.kind = TaskKind::Grounding;
  s.image_ref = image_id;
  s.source = source;
  s.payload = std::move(payload);
  return s;
}

std::vector<TaskSample> reorganize_grounding(const std::vector<AnnotatedImage>& images, std::uint64_t seed,
                                             double dedup_iou, const Lexicon& lexicon) {
  std::vector<ObjectsPayload> payloads;
  std::vector<Source> sources;
  for (const auto& image : images) {
    payloads.push_back(detection_labels(image, dedup_iou, lexicon));
    sources.push_back(image_source(image));
  }
  const auto pools = label_pools(sources, payloads);
  std::vector<TaskSample> out;
  for (std::size_t i = 0; i < images.size(); ++i)
    out.push_back(grounding_for_image(images[i], payloads[i], pools.at(sources[i]), seed));
  return out;
}

// ---- driver -----------------------------------------------------------------------

CurateResult curate(const Corpus& corpus, const CurateOptions& options) {
  std::vector<const AnnotatedImage*> images;
  images.reserve(corpus.images.size());
  for (const auto& img : corpus.images) images.push_back(&img);
  std::sort(images.begin(), images.end(),
            [](const AnnotatedImage* a, const AnnotatedImage* b) { return a->image_id < b->image_id; });
  const std::size_t n = images.size();

  struct PerImage {
    ObjectsPayload labels;
    std::optional<TaskSample> detection;
    CurationLedger task_ledger;
    std::vector<TaskSample> reg;
    std::map<Source, CurationLedger> reg_ledgers;
    std::vector<TaskSample> rec;
    std::optional<TaskSample> grounding;
  };
  std::vector<PerImage> work(n);

  parallel_for(n, options.jobs, [&](std::size_t i) {
    const AnnotatedImage& image = *images[i];
    PerImage& w = work[i];
    if (options.task_level && !image.regions.empty())
      w.detection = merge_to_detection(image, options.dedup_iou, &w.task_ledger, options.lexicon);
    if (options.grounding) {
      w.labels = w.detection ? std::get<ObjectsPayload>(w.detection->payload)
                             : detection_labels(image, options.dedup_iou, options.lexicon);
    }
    if (options.annotation_level) w.reg = reg_for_image(image, w.reg_ledgers, options.lexicon);
    if (options.rec) w.rec = rec_for_image(image);
  });

  if (options.grounding) {
    std::vector<Source> sources;
    std::vector<ObjectsPayload> payloads;
    for (std::size_t i = 0; i < n; ++i) {
      sources.push_back(image_source(*images[i]));
      payloads.push_back(work[i].labels);
    }
    const auto pools = label_pools(sources, payloads);
    parallel_for(n, options.jobs, [&](std::size_t i) {
      work[i].grounding = grounding_for_image(*images[i], work[i].labels, pools.at(sources[i]), options.seed);
    });
  }

  CurateResult result;
  for (std::size_t i = 0; i < n; ++i) {
    PerImage& w = work[i];
    if (w.detection) {
      result.report.task_level[w.detection->source] += w.task_ledger;
      result.samples.push_back(std::move(*w.detection));
    }
    if (w.grounding) {
      ++result.report.grounding_samples;
      result.samples.push_back(std::move(*w.grounding));
    }
    result.report.rec_samples += w.rec.size();
    std::move(w.rec.begin(), w.rec.end(), std::back_inserter(result.samples));
    for (const auto& [source, ledger] : w.reg_ledgers) result.report.annotation_level[source] += ledger;
    std::move(w.reg.begin(), w.reg.end(), std::back_inserter(result.samples));
  }
  result.samples.insert(result.samples.end(), corpus.samples.begin(), corpus.samples.end());
  return result;
}

}  // namespace forge
