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

#include "forge/model.hpp"

#include <array>
#include <set>
#include <utility>

#include "forge/error.hpp"

namespace forge {

namespace {

struct SourceName {
  Source source;
  std::string_view name;
};

constexpr std::array kSourceNames = {
    SourceName{Source::ShareGPT4V, "sharegpt4v"},
    SourceName{Source::RefCOCO, "refcoco"},
    SourceName{Source::RefCOCOPlus, "refcoco+"},
    SourceName{Source::RefCOCOg, "refcocog"},
    SourceName{Source::GRefCOCO, "grefcoco"},
    SourceName{Source::Osprey, "osprey"},
    SourceName{Source::Flickr30KEntities, "flickr30k-entities"},
    SourceName{Source::VisualGenome, "visual-genome"},
    SourceName{Source::Objects365, "objects365"},
    SourceName{Source::MSCOCO, "mscoco"},
    SourceName{Source::V3Det, "v3det"},
    SourceName{Source::UltraChat, "ultrachat"},
    SourceName{Source::FlanMini, "flan-mini"},
    SourceName{Source::OpenOrca, "openorca"},
    SourceName{Source::ShareGPT, "sharegpt"},
    SourceName{Source::MetaMathQA, "metamathqa"},
    SourceName{Source::MathInstruct, "mathinstruct"},
    SourceName{Source::WizardCoder, "wizardcoder"},
    SourceName{Source::LLaVA, "llava"},
    SourceName{Source::ALLaVA, "allava"},
    SourceName{Source::LVISInstruct4V, "lvis-instruct4v"},
    SourceName{Source::TextCaps, "textcaps"},
    SourceName{Source::VQAv2, "vqav2"},
    SourceName{Source::GQA, "gqa"},
    SourceName{Source::OKVQA, "ok-vqa"},
    SourceName{Source::AOKVQA, "a-okvqa"},
    SourceName{Source::SQA, "sqa"},
    SourceName{Source::VizWiz, "vizwiz"},
    SourceName{Source::TextVQA, "textvqa"},
    SourceName{Source::OCRVQA, "ocr-vqa"},
    SourceName{Source::AI2D, "ai2d"},
    SourceName{Source::Synthdog, "synthdog"},
    SourceName{Source::DVQA, "dvqa"},
    SourceName{Source::ChartQA, "chartqa"},
    SourceName{Source::DocVQA, "docvqa"},
    SourceName{Source::InfoVQA, "infovqa"},
    SourceName{Source::DeepForm, "deepform"},
    SourceName{Source::KLC, "klc"},
    SourceName{Source::WTQ, "wtq"},
    SourceName{Source::TabFact, "tabfact"},
    SourceName{Source::OpenImages, "open-images"},
    SourceName{Source::FSCD, "fscd"},
    SourceName{Source::GriffonV2, "griffon-v2"},
};

struct KindName {
  TaskKind kind;
  std::string_view name;
};

constexpr std::array kKindNames = {
    KindName{TaskKind::Caption, "Caption"},
    KindName{TaskKind::REC, "REC"},
    KindName{TaskKind::REG, "REG"},
    KindName{TaskKind::Detection, "Detection"},
    KindName{TaskKind::Grounding, "Grounding"},
    KindName{TaskKind::Counting, "Counting"},
    KindName{TaskKind::GeneralVQA, "GeneralVQA"},
    KindName{TaskKind::SceneTextVQA, "SceneTextVQA"},
    KindName{TaskKind::DocVQA, "DocVQA"},
    KindName{TaskKind::LanguageOnly, "LanguageOnly"},
    KindName{TaskKind::VLInstruction, "VLInstruction"},
};

[[noreturn]] void malformed(const std::string& what, const std::string& where = {}) {
  throw Error(ErrorCode::MalformedRecord, what, where);
}

template <typename T>
T field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) malformed(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    malformed(std::string("field '") + key + "' has the wrong type");
  }
}

std::optional<std::string> optional_string(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_string()) malformed(std::string("field '") + key + "' must be a string or null");
  return j.at(key).get<std::string>();
}

Json boxes_to_json(const std::vector<Box>& boxes) {
  Json arr = Json::array();
  for (const auto& b : boxes) arr.push_back(box_to_json(b));
  return arr;
}

std::vector<Box> boxes_from_json(const Json& j) {
  if (!j.is_array()) malformed("box list must be an array");
  std::vector<Box> out;
  out.reserve(j.size());
  for (const auto& b : j) out.push_back(box_from_json(b));
  return out;
}

Json turns_to_json(const std::vector<Turn>& turns) {
  Json arr = Json::array();
  for (const auto& t : turns) arr.push_back({{"role", to_string(t.role)}, {"text", t.text}});
  return arr;
}

std::vector<Turn> turns_from_json(const Json& j) {
  if (!j.is_array()) malformed("turns must be an array");
  std::vector<Turn> out;
  for (const auto& t : j) {
    auto role = field<std::string>(t, "role");
    Turn turn;
    if (role == "user" || role == "human") {
      turn.role = Role::User;
    } else if (role == "assistant" || role == "gpt") {
      turn.role = Role::Assistant;
    } else {
      malformed("unknown role '" + role + "'");
    }
    turn.text = field<std::string>(t, "text");
    out.push_back(std::move(turn));
  }
  return out;
}

}  // namespace

std::string_view to_string(DetailLevel level) {
  switch (level) {
    case DetailLevel::ClassLevel: return "class_level";
    case DetailLevel::Concise: return "concise";
    case DetailLevel::Detailed: return "detailed";
    case DetailLevel::Unclassified: return "unclassified";
  }
  return "unclassified";
}

DetailLevel detail_level_from_string(std::string_view text) {
  if (text == "class_level") return DetailLevel::ClassLevel;
  if (text == "concise") return DetailLevel::Concise;
  if (text == "detailed") return DetailLevel::Detailed;
  if (text == "unclassified") return DetailLevel::Unclassified;
  malformed("unknown detail level '" + std::string(text) + "'");
}

std::string_view to_string(Source source) {
  for (const auto& s : kSourceNames)
    if (s.source == source) return s.name;
  return "unknown";
}

std::optional<Source> source_from_string(std::string_view name) {
  for (const auto& s : kSourceNames)
    if (s.name == name) return s.source;
  return std::nullopt;
}

const std::vector<Source>& all_sources() {
  static const std::vector<Source> sources = [] {
    std::vector<Source> out;
    for (const auto& s : kSourceNames) out.push_back(s.source);
    return out;
  }();
  return sources;
}

bool is_detailed_source(Source source) {
  return source == Source::Osprey || source == Source::Flickr30KEntities;
}

std::string_view to_string(TaskKind kind) {
  for (const auto& k : kKindNames)
    if (k.kind == kind) return k.name;
  return "unknown";
}

std::optional<TaskKind> task_kind_from_string(std::string_view name) {
  for (const auto& k : kKindNames)
    if (k.name == name) return k.kind;
  return std::nullopt;
}

const std::vector<TaskKind>& all_task_kinds() {
  static const std::vector<TaskKind> kinds = [] {
    std::vector<TaskKind> out;
    for (const auto& k : kKindNames) out.push_back(k.kind);
    return out;
  }();
  return kinds;
}

bool is_localization_kind(TaskKind kind) {
  return kind == TaskKind::REC || kind == TaskKind::REG || kind == TaskKind::Detection ||
         kind == TaskKind::Grounding || kind == TaskKind::Counting;
}

std::string_view to_string(Role role) { return role == Role::User ? "user" : "assistant"; }

void check_sample(const TaskSample& s) {
  const bool text_only = s.kind == TaskKind::LanguageOnly;
  if (text_only && s.image_ref) malformed("LanguageOnly sample must not reference an image", s.sample_id);
  if (!text_only && !s.image_ref) malformed("sample must reference exactly one image", s.sample_id);

  bool payload_ok = false;
  switch (s.kind) {
    case TaskKind::Caption: payload_ok = std::holds_alternative<CaptionPayload>(s.payload); break;
    case TaskKind::REC: payload_ok = std::holds_alternative<RecPayload>(s.payload); break;
    case TaskKind::REG: payload_ok = std::holds_alternative<RegPayload>(s.payload); break;
    case TaskKind::Detection:
    case TaskKind::Grounding: payload_ok = std::holds_alternative<ObjectsPayload>(s.payload); break;
    case TaskKind::Counting: payload_ok = std::holds_alternative<CountingPayload>(s.payload); break;
    default: payload_ok = std::holds_alternative<DialoguePayload>(s.payload); break;
  }
  if (!payload_ok) malformed("payload does not match kind " + std::string(to_string(s.kind)), s.sample_id);

  if (const auto* objects = std::get_if<ObjectsPayload>(&s.payload)) {
    std::set<std::string> seen;
    for (const auto& o : objects->objects)
      if (!seen.insert(o.label).second) malformed("duplicate category '" + o.label + "'", s.sample_id);
    if (s.kind == TaskKind::Grounding && objects->objects.size() > 10)
      malformed("grounding sample queries more than 10 categories", s.sample_id);
  }
}

Json box_to_json(const Box& box) { return Json::array({box.x1, box.y1, box.x2, box.y2}); }

Box box_from_json(const Json& j, CoordSpace space) {
  if (!j.is_array() || j.size() != 4) malformed("bbox must be an array of 4 numbers");
  for (const auto& v : j)
    if (!v.is_number()) malformed("bbox must be an array of 4 numbers");
  return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), space};
}

Json image_to_json(const AnnotatedImage& image) {
  Json j = {{"image_id", image.image_id},
            {"width", image.width},
            {"height", image.height},
            {"uri", image.uri}};
  if (!image.negative_expressions.empty()) j["negatives"] = image.negative_expressions;
  return j;
}

AnnotatedImage image_from_json(const Json& j) {
  AnnotatedImage image;
  image.image_id = field<std::string>(j, "image_id");
  image.width = field<int>(j, "width");
  image.height = field<int>(j, "height");
  image.uri = j.value("uri", std::string{});
  if (j.contains("negatives")) image.negative_expressions = field<std::vector<std::string>>(j, "negatives");
  if (image.width <= 0 || image.height <= 0) malformed("image size must be positive", image.image_id);
  return image;
}

Json region_to_json(const std::string& image_id, const RegionAnnotation& region) {
  Json j = {{"image_id", image_id},
            {"bbox", box_to_json(region.box)},
            {"expression", region.expression},
            {"category", region.category ? Json(*region.category) : Json(nullptr)},
            {"source", to_string(region.source)}};
  if (region.detail_level != DetailLevel::Unclassified) j["detail_level"] = to_string(region.detail_level);
  return j;
}

std::pair<std::string, RegionAnnotation> region_from_json(const Json& j) {
  RegionAnnotation r;
  auto image_id = field<std::string>(j, "image_id");
  r.box = box_from_json(j.contains("bbox") ? j.at("bbox") : Json());
  r.expression = field<std::string>(j, "expression");
  r.category = optional_string(j, "category");
  auto source = source_from_string(field<std::string>(j, "source"));
  if (!source) malformed("unknown source '" + j.at("source").get<std::string>() + "'", image_id);
  r.source = *source;
  if (j.contains("detail_level")) r.detail_level = detail_level_from_string(field<std::string>(j, "detail_level"));
  return {std::move(image_id), std::move(r)};
}

Json sample_to_json(const TaskSample& s) {
  Json payload = std::visit(
      [](const auto& p) -> Json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, CaptionPayload>) {
          return {{"caption", p.caption}};
        } else if constexpr (std::is_same_v<P, RecPayload>) {
          return {{"width", p.width}, {"height", p.height}, {"expression", p.expression},
                  {"bbox", box_to_json(p.box)}};
        } else if constexpr (std::is_same_v<P, RegPayload>) {
          return {{"width", p.width}, {"height", p.height}, {"bbox", box_to_json(p.box)},
                  {"description", p.description}, {"detail", to_string(p.detail)}};
        } else if constexpr (std::is_same_v<P, ObjectsPayload>) {
          Json objects = Json::array();
          for (const auto& o : p.objects) objects.push_back({{"label", o.label}, {"boxes", boxes_to_json(o.boxes)}});
          return {{"width", p.width}, {"height", p.height}, {"objects", objects}};
        } else if constexpr (std::is_same_v<P, CountingPayload>) {
          return {{"width", p.width}, {"height", p.height}, {"label", p.label},
                  {"boxes", boxes_to_json(p.boxes)}};
        } else {
          return {{"turns", turns_to_json(p.turns)}};
        }
      },
      s.payload);
  return {{"sample_id", s.sample_id},
          {"kind", to_string(s.kind)},
          {"image_id", s.image_ref ? Json(*s.image_ref) : Json(nullptr)},
          {"source", to_string(s.source)},
          {"payload", std::move(payload)}};
}

TaskSample sample_from_json(const Json& j) {
  TaskSample s;
  s.sample_id = field<std::string>(j, "sample_id");
  auto kind = task_kind_from_string(field<std::string>(j, "kind"));
  if (!kind) malformed("unknown kind '" + j.at("kind").get<std::string>() + "'", s.sample_id);
  s.kind = *kind;
  s.image_ref = optional_string(j, "image_id");
  auto source = source_from_string(field<std::string>(j, "source"));
  if (!source) malformed("unknown source '" + j.at("source").get<std::string>() + "'", s.sample_id);
  s.source = *source;
  if (!j.contains("payload") || !j.at("payload").is_object()) malformed("payload must be an object", s.sample_id);
  const Json& p = j.at("payload");

  switch (s.kind) {
    case TaskKind::Caption:
      s.payload = CaptionPayload{field<std::string>(p, "caption")};
      break;
    case TaskKind::REC:
      s.payload = RecPayload{field<int>(p, "width"), field<int>(p, "height"),
                             field<std::string>(p, "expression"), box_from_json(p.value("bbox", Json()))};
      break;
    case TaskKind::REG:
      s.payload = RegPayload{field<int>(p, "width"), field<int>(p, "height"), box_from_json(p.value("bbox", Json())),
                             field<std::string>(p, "description"),
                             detail_level_from_string(p.value("detail", std::string("concise")))};
      break;
    case TaskKind::Detection:
    case TaskKind::Grounding: {
      ObjectsPayload op{field<int>(p, "width"), field<int>(p, "height"), {}};
      if (!p.contains("objects") || !p.at("objects").is_array()) malformed("objects must be an array", s.sample_id);
      for (const auto& o : p.at("objects"))
        op.objects.push_back({field<std::string>(o, "label"), boxes_from_json(o.value("boxes", Json::array()))});
      s.payload = std::move(op);
      break;
    }
    case TaskKind::Counting:
      s.payload = CountingPayload{field<int>(p, "width"), field<int>(p, "height"), field<std::string>(p, "label"),
                                  boxes_from_json(p.value("boxes", Json::array()))};
      break;
    default:
      s.payload = DialoguePayload{turns_from_json(p.value("turns", Json()))};
      break;
  }
  check_sample(s);
  return s;
}

Json conversation_to_json(const ConversationRecord& r) {
  return {{"sample_id", r.sample_id},
          {"image_id", r.image_ref ? Json(*r.image_ref) : Json(nullptr)},
          {"turns", turns_to_json(r.turns)},
          {"token_estimate", r.token_estimate}};
}

ConversationRecord conversation_from_json(const Json& j) {
  ConversationRecord r;
  r.sample_id = field<std::string>(j, "sample_id");
  r.image_ref = optional_string(j, "image_id");
  r.turns = turns_from_json(j.value("turns", Json()));
  r.token_estimate = j.value("token_estimate", std::int64_t{0});
  return r;
}

}  // namespace forge
