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

// Canonical data model shared by every pipeline stage, plus its JSONL
// encoding (images.jsonl, regions.jsonl, samples.jsonl, conversations.jsonl).

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace forge {

using Json = nlohmann::json;

inline constexpr int kDefaultCoordBins = 1000;

enum class CoordKind { AbsolutePixels, NormalizedGrid };

struct CoordSpace {
  CoordKind kind = CoordKind::AbsolutePixels;
  int bins = 0;  // only meaningful for NormalizedGrid

  static constexpr CoordSpace pixels() { return {CoordKind::AbsolutePixels, 0}; }
  static constexpr CoordSpace grid(int bins) { return {CoordKind::NormalizedGrid, bins}; }

  bool is_grid() const { return kind == CoordKind::NormalizedGrid; }
  friend bool operator==(const CoordSpace&, const CoordSpace&) = default;
};

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  CoordSpace space{};

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  friend bool operator==(const Box&, const Box&) = default;
};

enum class DetailLevel { ClassLevel, Concise, Detailed, Unclassified };

std::string_view to_string(DetailLevel level);
DetailLevel detail_level_from_string(std::string_view text);

// Every supported dataset source.
enum class Source {
  ShareGPT4V, RefCOCO, RefCOCOPlus, RefCOCOg, GRefCOCO, Osprey,
  Flickr30KEntities, VisualGenome, Objects365, MSCOCO, V3Det,
  UltraChat, FlanMini, OpenOrca, ShareGPT, MetaMathQA, MathInstruct,
  WizardCoder, LLaVA, ALLaVA, LVISInstruct4V, TextCaps, VQAv2, GQA,
  OKVQA, AOKVQA, SQA, VizWiz, TextVQA, OCRVQA, AI2D, Synthdog, DVQA,
  ChartQA, DocVQA, InfoVQA, DeepForm, KLC, WTQ, TabFact, OpenImages,
  FSCD, GriffonV2,
};

std::string_view to_string(Source source);
std::optional<Source> source_from_string(std::string_view name);
const std::vector<Source>& all_sources();

// Sources whose region text is already a detailed description and skips
// the expression classifier.
bool is_detailed_source(Source source);

struct RegionAnnotation {
  Box box;
  std::string expression;
  std::optional<std::string> category;
  DetailLevel detail_level = DetailLevel::Unclassified;
  Source source = Source::MSCOCO;
};

struct AnnotatedImage {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::string uri;
  std::vector<RegionAnnotation> regions;
  // Referring expressions with no matching target (generalized REC).
  std::vector<std::string> negative_expressions;
};

enum class TaskKind {
  Caption, REC, REG, Detection, Grounding, Counting, GeneralVQA,
  SceneTextVQA, DocVQA, LanguageOnly, VLInstruction,
};

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> task_kind_from_string(std::string_view name);
const std::vector<TaskKind>& all_task_kinds();
bool is_localization_kind(TaskKind kind);

enum class Role { User, Assistant };
std::string_view to_string(Role role);

struct Turn {
  Role role = Role::User;
  std::string text;
  friend bool operator==(const Turn&, const Turn&) = default;
};

struct LabeledBoxes {
  std::string label;
  std::vector<Box> boxes;
  friend bool operator==(const LabeledBoxes&, const LabeledBoxes&) = default;
};

struct CaptionPayload {
  std::string caption;
};

struct RecPayload {
  int width = 0, height = 0;
  std::string expression;
  Box box;
};

struct RegPayload {
  int width = 0, height = 0;
  Box box;
  std::string description;
  DetailLevel detail = DetailLevel::Concise;
};

// Detection and Grounding share this shape. Grounding entries may carry an
// empty box list for a queried label that is absent from the image.
struct ObjectsPayload {
  int width = 0, height = 0;
  std::vector<LabeledBoxes> objects;
};

struct CountingPayload {
  int width = 0, height = 0;
  std::string label;
  std::vector<Box> boxes;
};

// GeneralVQA, SceneTextVQA, DocVQA, LanguageOnly and VLInstruction.
struct DialoguePayload {
  std::vector<Turn> turns;
};

using Payload = std::variant<CaptionPayload, RecPayload, RegPayload, ObjectsPayload,
                             CountingPayload, DialoguePayload>;

struct TaskSample {
  std::string sample_id;
  TaskKind kind = TaskKind::Caption;
  std::optional<std::string> image_ref;
  Source source = Source::MSCOCO;
  Payload payload;
};

// Throws MalformedRecord when the sample breaks a TaskSample invariant.
void check_sample(const TaskSample& sample);

struct ConversationRecord {
  std::string sample_id;
  std::optional<std::string> image_ref;
  std::vector<Turn> turns;
  std::int64_t token_estimate = 0;
};

// ---- JSONL encoding -------------------------------------------------------

Json box_to_json(const Box& box);
Box box_from_json(const Json& j, CoordSpace space = CoordSpace::pixels());

Json image_to_json(const AnnotatedImage& image);
AnnotatedImage image_from_json(const Json& j);

Json region_to_json(const std::string& image_id, const RegionAnnotation& region);
// Returns (image_id, region).
std::pair<std::string, RegionAnnotation> region_from_json(const Json& j);

Json sample_to_json(const TaskSample& sample);
TaskSample sample_from_json(const Json& j);

Json conversation_to_json(const ConversationRecord& record);
ConversationRecord conversation_from_json(const Json& j);

}  // namespace forge
