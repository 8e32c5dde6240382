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
#include <optional>
#include <string>
#include <vector>

#include "forge/io.hpp"
#include "forge/model.hpp"

namespace forge {

// Instruction paraphrases per task kind. Keys are TaskKind names plus
// "REG.detailed" for detailed-description requests.
//
// Placeholders: {expr} (REC), {box} (REG), {phrase} (REG.detailed),
// {labels} (Detection, Grounding, Counting), {question} (dialogue kinds:
// the first user turn).
struct TemplatePack {
  std::map<std::string, std::vector<std::string>> templates;
  std::vector<std::string> responsive_phrases{"more detailed"};
  std::string image_token = "<image>";

  static TemplatePack builtin();
  // Throws Config / MissingTemplate when a kind lacks templates or a template
  // lacks a placeholder its kind requires.
  static TemplatePack load(const fs::path& path);
  static TemplatePack from_json(const Json& j);
  void validate() const;
  Json to_json() const;
};

// "[x1, y1, x2, y2]" for a grid box.
std::string serialize_box(const Box& grid_box);

// One line per label: "label-[..][..]" or "label-None". An empty list
// serializes to "None".
std::string serialize_localization(const std::vector<LabeledBoxes>& grid_entries);

struct RenderOptions {
  std::uint64_t seed = 0;
  int coord_bins = kDefaultCoordBins;
};

ConversationRecord serialize_sample(const TaskSample& sample, const TemplatePack& pack,
                                    const RenderOptions& options = {});

struct ParsedLocalization {
  std::vector<LabeledBoxes> entries;  // grid boxes in order of appearance
  std::optional<std::int64_t> count;  // trailing integer line (counting answers)
  std::vector<std::string> diagnostics;
  bool recovered = false;
};

// Strict grammar first:
//   output  := entry (("\n" | ";") entry)* ["\n" int]
//   entry   := label "-" (box+ | "None")
//   box     := "[" int ("," WS* int){3} "]"
// On failure, recovery scans for 4-integer bracket groups anywhere and
// attaches each to the nearest preceding label word (preferring
// `known_labels` when given); every recovery step is listed in
// `diagnostics`. Throws NoBoxesFound when nothing parses.
ParsedLocalization parse_localization(std::string_view text, int coord_bins = kDefaultCoordBins,
                                      const std::vector<std::string>& known_labels = {});

inline constexpr double kLengthSafetyFactor = 1.3;
inline constexpr std::int64_t kStage1Budget = 2048;
inline constexpr std::int64_t kStage23Budget = 4096;

// ceil(whitespace tokens over all turns * 1.3).
std::int64_t estimate_length(const ConversationRecord& record);

struct LengthCheck {
  std::int64_t estimate = 0;
  bool over_budget = false;
};
// Budget must be 2048 or 4096.
LengthCheck check_length(const ConversationRecord& record, std::int64_t budget);

// Alternation (user first) and every bracket group in assistant text being a
// valid grid box. Returns the violations.
std::vector<std::string> check_conversation(const ConversationRecord& record, int coord_bins = kDefaultCoordBins);

struct RenderLedger {
  std::size_t input = 0;
  std::size_t rendered = 0;
  std::size_t over_budget = 0;
  Json to_json() const;
};

struct RenderResult {
  std::vector<ConversationRecord> records;
  RenderLedger ledger;
};

RenderResult render_samples(const std::vector<TaskSample>& samples, const TemplatePack& pack,
                            const RenderOptions& options, std::int64_t budget, int jobs = 1);

}  // namespace forge
