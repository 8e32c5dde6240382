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

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "forge/ingest.hpp"
#include "forge/model.hpp"
#include "forge/rng.hpp"

namespace forge {

// Word lists driving the expression classifier. Loaded from JSON
// ({"articles": [...], "positional": [...], "verbs": [...]}) or built-in.
struct Lexicon {
  std::set<std::string> articles;
  std::set<std::string> positional;
  std::set<std::string> verbs;

  static const Lexicon& builtin();
  static Lexicon load(const fs::path& path);
  Json to_json() const;
};

inline constexpr std::size_t kClassLevelMaxTokens = 3;
inline constexpr std::size_t kDetailedMinTokens = 13;  // "more than 12"
inline constexpr std::size_t kVerbTailTokens = 2;
inline constexpr double kDefaultDedupIou = 0.9;
inline constexpr std::size_t kMaxGroundingQueries = 10;

struct ExpressionClass {
  DetailLevel level = DetailLevel::Concise;
  std::vector<std::string> evidence;  // matched rule identifiers
};

// Rule cascade: class-level (short, positional modifiers only) before
// detailed (long, or a verb marker with a tail) before concise.
// Throws EmptyExpression when the text has no tokens.
ExpressionClass classify_expression(std::string_view expression, const Lexicon& lexicon = Lexicon::builtin());

// Last token after dropping leading articles and positional modifiers.
std::string head_noun(std::string_view expression, const Lexicon& lexicon = Lexicon::builtin());

// Category when present, otherwise the expression's head noun.
std::string region_label(const RegionAnnotation& region, const Lexicon& lexicon = Lexicon::builtin());

// Per-source counters. Every input region ends in exactly one outcome:
// input_regions == emitted_boxes + deduped_boxes + dropped_class_level
//                  + retained_concise + retained_detailed.
struct CurationLedger {
  std::size_t input_regions = 0;
  std::size_t merged_samples = 0;
  std::size_t emitted_boxes = 0;
  std::size_t deduped_boxes = 0;
  std::size_t dropped_class_level = 0;
  std::size_t retained_concise = 0;
  std::size_t retained_detailed = 0;

  bool balanced() const {
    return input_regions ==
           emitted_boxes + deduped_boxes + dropped_class_level + retained_concise + retained_detailed;
  }
  CurationLedger& operator+=(const CurationLedger& o);
  Json to_json() const;
};

struct CurationReport {
  std::map<Source, CurationLedger> task_level;
  std::map<Source, CurationLedger> annotation_level;
  std::size_t rec_samples = 0;
  std::size_t grounding_samples = 0;

  bool balanced() const;
  Json to_json() const;
};

// Task-level curation: one Detection sample for the image. Boxes of the same
// label with IoU >= dedup_iou collapse onto the first occurrence. Labels are
// sorted lexicographically, boxes by (x1, y1). Throws NoRegions.
TaskSample merge_to_detection(const AnnotatedImage& image, double dedup_iou = kDefaultDedupIou,
                              CurationLedger* ledger = nullptr, const Lexicon& lexicon = Lexicon::builtin());

// Re-applies the merge rule to an existing payload; merging an already
// merged payload is the identity. Returns the number of boxes removed.
std::size_t merge_objects(ObjectsPayload& payload, double dedup_iou = kDefaultDedupIou);

// Annotation-level curation over free-text regions (regions without a
// category). Class-level regions are dropped; concise and detailed regions
// become REG samples carrying their detail level.
std::vector<TaskSample> curate_reg(const std::vector<AnnotatedImage>& images,
                                   std::map<Source, CurationLedger>& ledgers,
                                   const Lexicon& lexicon = Lexicon::builtin());

// Number of present/absent labels a grounding query of size k draws.
struct QueryMix {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};
QueryMix grounding_query_mix(std::size_t k, std::size_t present, std::size_t absent);

// One grounding sample built from a detection payload: k labels (positives
// from `detection`, negatives from `pool` labels not in the image), sorted,
// absent labels carrying empty box lists.
TaskSample build_grounding_sample(const std::string& image_id, Source source, const ObjectsPayload& detection,
                                  const std::vector<std::string>& pool, std::size_t k, Rng& rng);

// For every image draws k ~ Uniform{0..min(10, |pool|)} under a per-image
// seed derived from (seed, image_id). The label pool is per source.
std::vector<TaskSample> reorganize_grounding(const std::vector<AnnotatedImage>& images, std::uint64_t seed,
                                             double dedup_iou = kDefaultDedupIou,
                                             const Lexicon& lexicon = Lexicon::builtin());

// One REC sample per region of the referring sources (RefCOCO family).
std::vector<TaskSample> extract_rec(const std::vector<AnnotatedImage>& images);

struct CurateOptions {
  bool task_level = true;
  bool annotation_level = true;
  bool grounding = true;
  bool rec = true;
  double dedup_iou = kDefaultDedupIou;
  std::uint64_t seed = 0;
  int jobs = 1;
  Lexicon lexicon = Lexicon::builtin();
};

struct CurateResult {
  std::vector<TaskSample> samples;
  CurationReport report;
};

// Runs the selected curation levels over the corpus. Images are processed
// in image_id order (in parallel up to `jobs`); pre-built samples in the
// corpus pass through unchanged after the curated ones.
CurateResult curate(const Corpus& corpus, const CurateOptions& options);

}  // namespace forge
